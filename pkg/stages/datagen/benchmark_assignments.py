"""
Observed-class assignments of the published category-shift benchmarks.
Keys are the nominal missing rates. The Office-Caltech "0.25" split
actually keeps 7 of 10 classes per task (exact gamma 0.3).
"""
from typing import Dict, List, Tuple

from orchestrator.errors import ConfigurationError, InvalidAssignmentError
from orchestrator.types import DatasetManifest

from .category_shift import Assignment, assignment_from_names, validate_assignment

OFFICE_HOME_TASKS = ("artistic", "clipart", "product", "real_world")
OFFICE_HOME_CLASSES = (
    "Alarm_Clock", "Backpack", "Batteries", "Bed", "Bike", "Bottle",
    "Bucket", "Calculator", "Calendar", "Candles", "Chair", "Clipboards",
    "Computer", "Couch", "Curtains", "Desk_Lamp", "Drill", "Eraser",
    "Exit_Sign", "Fan", "File_Cabinet", "Flipflops", "Flowers", "Folder",
    "Fork", "Glasses", "Hammer", "Helmet", "Kettle", "Keyboard",
    "Knives", "Lamp_Shade", "Laptop", "Marker", "Monitor", "Mop",
    "Mouse", "Mug", "Notebook", "Oven", "Pan", "Paper_Clip",
    "Pen", "Pencil", "Postit_Notes", "Printer", "Push_Pin", "Radio",
    "Refrigerator", "Ruler", "Scissors", "Screwdriver", "Shelf", "Sink",
    "Sneakers", "Soda", "Speaker", "Spoon", "TV", "Table",
    "Telephone", "ToothBrush", "Toys", "Trash_Can", "Webcam",
)
# 16/17/16/16 classes at 0.75 (exact gamma 195/260); 32 per task at the
# nominal 0.5 (exact gamma 132/260)
OFFICE_HOME: Dict[float, List[List[str]]] = {
    0.75: [
        ["Alarm_Clock", "Bottle", "Fan", "Flowers", "Fork", "Glasses", "Helmet", "Kettle",
         "Knives", "Lamp_Shade", "Push_Pin", "Radio", "Refrigerator", "Shelf", "Soda", "Spoon"],
        ["Batteries", "Computer", "Drill", "Folder", "Hammer", "Keyboard", "Marker", "Monitor", "Mug",
         "Pan", "Pen", "Pencil", "Ruler", "Screwdriver", "TV", "Table", "Toys"],
        ["Calculator", "Calendar", "Chair", "Couch", "Desk_Lamp", "Flipflops", "Laptop", "Mop",
         "Mouse", "Notebook", "Printer", "Scissors", "Sneakers", "Speaker", "Trash_Can", "Webcam"],
        ["Backpack", "Bed", "Bike", "Bucket", "Candles", "Clipboards", "Curtains", "Eraser",
         "Exit_Sign", "File_Cabinet", "Oven", "Paper_Clip", "Postit_Notes", "Sink", "Telephone", "ToothBrush"],
    ],
    0.5: [
        ["Alarm_Clock", "Batteries", "Bike", "Bottle", "Bucket", "Candles", "Desk_Lamp", "Fan",
         "File_Cabinet", "Flowers", "Fork", "Glasses", "Hammer", "Helmet", "Kettle", "Knives",
         "Lamp_Shade", "Laptop", "Marker", "Mop", "Mug", "Paper_Clip", "Pencil", "Push_Pin",
         "Radio", "Refrigerator", "Screwdriver", "Shelf", "Sink", "Soda", "Spoon", "ToothBrush"],
        ["Batteries", "Bed", "Bottle", "Calendar", "Computer", "Drill", "Fan", "Flowers",
         "Folder", "Fork", "Hammer", "Keyboard", "Marker", "Monitor", "Mouse", "Mug",
         "Notebook", "Pan", "Pen", "Pencil", "Postit_Notes", "Printer", "Push_Pin", "Ruler",
         "Scissors", "Screwdriver", "Soda", "Spoon", "TV", "Table", "Telephone", "Toys"],
        ["Backpack", "Calculator", "Calendar", "Chair", "Clipboards", "Computer", "Couch", "Curtains",
         "Desk_Lamp", "Drill", "Exit_Sign", "File_Cabinet", "Flipflops", "Folder", "Glasses", "Helmet",
         "Kettle", "Keyboard", "Laptop", "Monitor", "Mop", "Mouse", "Notebook", "Oven",
         "Pan", "Printer", "Scissors", "Sneakers", "Speaker", "TV", "Trash_Can", "Webcam"],
        ["Alarm_Clock", "Backpack", "Bed", "Bike", "Bucket", "Calculator", "Candles", "Chair",
         "Clipboards", "Couch", "Curtains", "Eraser", "Exit_Sign", "Flipflops", "Knives", "Lamp_Shade",
         "Oven", "Paper_Clip", "Pen", "Postit_Notes", "Radio", "Refrigerator", "Shelf", "Sink",
         "Sneakers", "Speaker", "Table", "Telephone", "ToothBrush", "Toys", "Trash_Can", "Webcam"],
    ],
}

OFFICE_CALTECH_TASKS = ("amazon", "webcam", "dslr", "caltech")
OFFICE_CALTECH_CLASSES = (
    "back_pack", "bike", "calculator", "headphones", "keyboard",
    "laptop_computer", "monitor", "mouse", "mug", "projector",
)
OFFICE_CALTECH: Dict[float, List[List[str]]] = {
    0.75: [
        ["keyboard", "laptop_computer"],
        ["calculator", "monitor", "mouse"],
        ["bike", "projector"],
        ["back_pack", "headphones", "mug"],
    ],
    0.5: [
        ["headphones", "keyboard", "laptop_computer", "mouse", "mug"],
        ["back_pack", "calculator", "monitor", "mouse", "projector"],
        ["bike", "keyboard", "laptop_computer", "monitor", "projector"],
        ["back_pack", "bike", "calculator", "headphones", "mug"],
    ],
    0.25: [
        ["calculator", "headphones", "keyboard", "laptop_computer", "mouse", "mug", "projector"],
        ["back_pack", "calculator", "keyboard", "monitor", "mouse", "mug", "projector"],
        ["back_pack", "bike", "calculator", "headphones", "laptop_computer", "monitor", "projector"],
        ["back_pack", "bike", "headphones", "laptop_computer", "monitor", "mouse", "mug"],
    ],
}

IMAGECLEF_TASKS = ("caltech", "imagenet", "pascal", "bing")
IMAGECLEF_CLASSES = (
    "airplanes", "bikes", "car-side", "computer-monitor", "dog", "horse",
    "hummingbird", "motorbikes", "people", "school-bus", "speed-boat", "wine-bottle",
)
IMAGECLEF: Dict[float, List[List[str]]] = {
    0.75: [
        ["bikes", "computer-monitor", "school-bus"],
        ["car-side", "hummingbird", "motorbikes"],
        ["dog", "people", "speed-boat"],
        ["airplanes", "horse", "wine-bottle"],
    ],
    0.5: [
        ["bikes", "computer-monitor", "dog", "people", "school-bus", "speed-boat"],
        ["bikes", "computer-monitor", "dog", "people", "school-bus", "speed-boat"],
        ["airplanes", "car-side", "horse", "hummingbird", "motorbikes", "wine-bottle"],
        ["airplanes", "car-side", "horse", "hummingbird", "motorbikes", "wine-bottle"],
    ],
    0.25: [
        ["bikes", "car-side", "computer-monitor", "dog", "hummingbird", "motorbikes",
         "people", "school-bus", "speed-boat"],
        ["airplanes", "bikes", "car-side", "computer-monitor", "horse", "hummingbird",
         "motorbikes", "school-bus", "wine-bottle"],
        ["airplanes", "bikes", "computer-monitor", "dog", "horse", "people",
         "school-bus", "speed-boat", "wine-bottle"],
        ["airplanes", "car-side", "dog", "horse", "hummingbird", "motorbikes",
         "people", "speed-boat", "wine-bottle"],
    ],
}

SKIN_LESION_TASKS = ("ham10000", "dermofit", "derm7pt")
SKIN_LESION_CLASSES = ("bcc", "bkl", "df", "mel", "nv", "vasc")
SKIN_LESION: Dict[float, List[List[str]]] = {
    0.67: [["bcc", "nv"], ["mel", "vasc"], ["bkl", "df"]],
    0.33: [
        ["bkl", "mel", "nv", "vasc"],
        ["bcc", "df", "mel", "nv"],
        ["bcc", "bkl", "df", "vasc"],
    ],
}

BENCHMARKS: Dict[str, Tuple[Tuple[str, ...], Tuple[str, ...], Dict[float, List[List[str]]]]] = {
    "office_home": (OFFICE_HOME_TASKS, OFFICE_HOME_CLASSES, OFFICE_HOME),
    "office_caltech": (OFFICE_CALTECH_TASKS, OFFICE_CALTECH_CLASSES, OFFICE_CALTECH),
    "imageclef": (IMAGECLEF_TASKS, IMAGECLEF_CLASSES, IMAGECLEF),
    "skin_lesion": (SKIN_LESION_TASKS, SKIN_LESION_CLASSES, SKIN_LESION),
}


def benchmark_assignment(name: str, rate: float) -> Tuple[Tuple[str, ...], List[List[str]]]:
    """Class names and per-task observed class names for one published split"""
    if name not in BENCHMARKS:
        raise ConfigurationError(f"Unknown benchmark '{name}'; choose from {sorted(BENCHMARKS)}")
    _, classes, table = BENCHMARKS[name]
    if rate not in table:
        raise ConfigurationError(f"Benchmark '{name}' has no {rate} split; choose from {sorted(table)}")
    return classes, table[rate]


def benchmark_observed(name: str, rate: float, manifest: DatasetManifest) -> Assignment:
    """Observed class ids of a published split, resolved against the dataset's class names"""
    _, observed = benchmark_assignment(name, rate)
    tasks = BENCHMARKS[name][0]
    if manifest.num_tasks != len(tasks):
        raise InvalidAssignmentError(
            f"Benchmark '{name}' has {len(tasks)} tasks {tasks}, dataset declares {manifest.num_tasks}"
        )
    ids = assignment_from_names(observed, manifest.class_names)
    return validate_assignment(ids, manifest.num_tasks, manifest.num_classes)
