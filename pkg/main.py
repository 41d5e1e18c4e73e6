#!/usr/bin/env python3

import argparse
import sys

from orchestrator.errors import ExperimentError
from orchestrator.pipeline import ExperimentPipeline, status_frame


class CommandParser(argparse.ArgumentParser):
    """Usage errors exit with 1, data errors with 2, numerical errors with 3"""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"Error: {message}", file=sys.stderr)
        sys.exit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = CommandParser(
        description="Association-graph learning for multi-task classification under category shifts",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py generate --out outputs/dataset.mtcs
  python main.py split outputs/dataset.mtcs --missing-rate 0.5 --out outputs/shifted.mtcs
  python main.py split office_home.mtcs --benchmark office_home --missing-rate 0.75
  python main.py train outputs/shifted.mtcs --out outputs/graph.ckpt
  python main.py eval outputs/graph.ckpt outputs/shifted.mtcs --out outputs/report.json
  python main.py --config configs/gradcheck.yaml gradcheck
  python main.py sweep --vary L=0,1,2,4 --seeds 5
        """
    )

    parser.add_argument(
        '--config', '-c',
        type=str,
        default='configs/experiment.yaml',
        help='Path to configuration file (default: configs/experiment.yaml)'
    )
    parser.add_argument('--seed', type=int, default=None, help='Override every seed in the configuration')
    parser.add_argument('--out', '-o', type=str, default=None, help='Output file of the command')

    # --out is accepted before or after the sub-command
    common = CommandParser(add_help=False)
    common.add_argument('--out', '-o', type=str, default=argparse.SUPPRESS)

    commands = parser.add_subparsers(dest='command', required=True)

    commands.add_parser('generate', parents=[common], help='Write a synthetic MTCS v1 dataset')

    split = commands.add_parser('split', parents=[common], help='Apply a category shift to the training split')
    split.add_argument('dataset', help='Input MTCS v1 dataset')
    group = split.add_mutually_exclusive_group()
    group.add_argument('--missing-rate', type=float, default=None, help='Random assignment with this missing rate')
    group.add_argument('--assignment', type=str, default=None, help='YAML file listing the observed classes per task')
    split.add_argument(
        '--benchmark', type=str, default=None,
        help='Published table (office_home, office_caltech, imageclef, skin_lesion) at --missing-rate'
    )

    train = commands.add_parser('train', parents=[common], help='Train a model and write a checkpoint')
    train.add_argument('dataset', help='Shifted MTCS v1 dataset')
    train.add_argument('--method', choices=['graph', 'erm', 'stl'], default=None)

    evaluate = commands.add_parser('eval', parents=[common], help='Evaluate a checkpoint on the test split')
    evaluate.add_argument('checkpoint')
    evaluate.add_argument('dataset')

    commands.add_parser('gradcheck', parents=[common], help='Compare analytic and finite-difference gradients')

    sweep = commands.add_parser('sweep', parents=[common], help='Multi-seed ablation table')
    sweep.add_argument('--vary', action='append', default=[], help='key=v1,v2,... (repeatable)')
    sweep.add_argument('--seeds', type=int, default=5)
    sweep.add_argument('--workers', type=int, default=1)

    commands.add_parser('status', parents=[common], help='Show the resolved configuration')
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    try:
        pipeline = ExperimentPipeline(args.config, seed=args.seed)

        if args.command == 'status':
            print_status(pipeline.get_pipeline_status())
            return 0

        if args.command == 'generate':
            result = pipeline.cmd_generate(args.out)
        elif args.command == 'split':
            result = pipeline.cmd_split(args.dataset, args.out, args.missing_rate, args.assignment, args.benchmark)
        elif args.command == 'train':
            result = pipeline.cmd_train(args.dataset, args.out, args.method)
        elif args.command == 'eval':
            result = pipeline.cmd_eval(args.checkpoint, args.dataset, args.out)
        elif args.command == 'gradcheck':
            result = pipeline.cmd_gradcheck()
        else:
            result = pipeline.cmd_sweep(args.vary, args.seeds, args.workers, args.out)

    except KeyboardInterrupt:
        print("\n\nInterrupted by user.", file=sys.stderr)
        return 1
    except ExperimentError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1

    return print_result(result)


def print_result(result) -> int:
    """Print command output; failures become a one-line diagnostic"""
    if result.status.value != "completed":
        print(f"Error: {result.command}: {'; '.join(result.errors)}", file=sys.stderr)
        return result.exit_code
    for line in result.messages:
        print(line)
    return 0


def print_status(status):
    print("\n" + "=" * 50)
    print("CATEGORY-SHIFT EXPERIMENT STATUS")
    print("=" * 50)
    print(f"Experiment: {status['experiment_name']} v{status['version']}")
    print()
    print(status_frame(status).to_string(index=False))
    print("\nData Paths:")
    for path_name, path_value in status['data_paths'].items():
        print(f"  {path_name}: {path_value}")
    print("=" * 50)


if __name__ == "__main__":
    sys.exit(main())
