# Feature extractor, classifiers and the flat parameter store
from .param_store import DTYPE, ParamStore, extractor_scope, init_params
from .networks import as_tensor, classify, embed

__all__ = ["DTYPE", "ParamStore", "extractor_scope", "init_params", "as_tensor", "classify", "embed"]
