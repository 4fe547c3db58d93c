from .expr import (
    DEFAULT_POOL,
    Expr,
    ExprException,
    ExprPool,
    NonIntegerExponentException,
    diff,
    diff_multi,
    free_symbols,
    to_source,
)
from .parser import ExprSyntaxException, UndeclaredIdentifierException, parse
from .evaluate import DomainEvaluationException, Evaluator, InvalidPointException, evaluate, evaluate_many
