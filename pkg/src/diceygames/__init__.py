"""Team-versus-Devil matrix games with shared uniform dice."""

from .allocator import AllocationResult, allocate_solve, count_structures, enumerate_structures
from .families import ALPHA, BETA, build_conjecture_strategy, gen_clique_mp, triangular_game
from .fritzjohn import FritzJohnCertificate, certify_fritz_john
from .game import (
    DicePack,
    DiceStructure,
    DiceyGame,
    Game,
    GameError,
    PayoffRules,
    Rule,
    matching_pennies,
    parse_game,
    parse_pack,
    serialize_game,
    serialize_pack,
)
from .optimizer import SolverOptions, check_threshold, maximin_lambda, solve
from .reductions import DqbfInstance, QuadSystem, encode_dqbf, encode_quad
from .schemes import BudgetExceeded, SchemeSpace
from .slicer import normalize
from .smt import emit_fixed_scheme, emit_full, validate_smtlib
from .strategy import (
    GridStrategy,
    PlayerTable,
    evaluate,
    monte_carlo,
    parse_strategy,
    serialize_strategy,
)

__version__ = "0.1.0"

__all__ = [
    "ALPHA", "BETA", "AllocationResult", "BudgetExceeded", "DicePack", "DiceStructure",
    "DiceyGame", "DqbfInstance", "FritzJohnCertificate", "Game", "GameError", "GridStrategy",
    "PayoffRules", "PlayerTable", "QuadSystem", "Rule", "SchemeSpace", "SolverOptions",
    "allocate_solve", "build_conjecture_strategy", "certify_fritz_john", "check_threshold",
    "count_structures", "emit_fixed_scheme", "emit_full", "encode_dqbf", "encode_quad",
    "enumerate_structures", "evaluate", "gen_clique_mp", "matching_pennies", "maximin_lambda",
    "monte_carlo", "normalize", "parse_game", "parse_pack", "parse_strategy", "serialize_game",
    "serialize_pack", "serialize_strategy", "solve", "triangular_game", "validate_smtlib",
]
