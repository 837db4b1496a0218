"""Game and dice data model, rule-list payoffs, and the JSON game documents."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

DEFAULT_DEVIL = "Devil"

# dense payoff tables above this many entries are refused
MAX_DENSE_ENTRIES = 50_000_000


class GameError(ValueError):
    """Base class for malformed games, structures and documents."""


class GameSyntaxError(GameError):
    def __init__(self, msg: str, line: int, column: int):
        super().__init__(f"{msg} (line {line}, column {column})")
        self.line = line
        self.column = column


class GameSemanticError(GameError):
    pass


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, msg: str) -> None:
        self.violations.append(msg)

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class Rule:
    when: Mapping[str, str]
    value: int


@dataclass(frozen=True)
class PayoffRules:
    """If-then-else payoff list: the first rule whose partial assignment
    matches the action profile gives the payoff, otherwise ``default``."""

    rules: tuple[Rule, ...]
    default: int = 0

    def lookup(self, profile: Mapping[str, str]) -> int:
        for rule in self.rules:
            if all(profile[p] == a for p, a in rule.when.items()):
                return rule.value
        return self.default


@dataclass(frozen=True, eq=False)
class Game:
    team_players: tuple[str, ...]
    actions: Mapping[str, tuple[str, ...]]
    payoff: PayoffRules
    devil_id: str = DEFAULT_DEVIL

    def __post_init__(self):
        object.__setattr__(self, "team_players", tuple(self.team_players))
        object.__setattr__(
            self, "actions", {p: tuple(a) for p, a in self.actions.items()}
        )
        players = self.team_players
        if len(set(players)) != len(players):
            raise GameSemanticError("duplicate team player identifier")
        if self.devil_id in players:
            raise GameSemanticError(f"devil id {self.devil_id!r} is also a team player")
        for p in self.all_players:
            acts = self.actions.get(p)
            if not acts:
                raise GameSemanticError(f"player {p!r} has no actions")
            if len(set(acts)) != len(acts):
                raise GameSemanticError(f"duplicate action for player {p!r}")
        extra = set(self.actions) - set(self.all_players)
        if extra:
            raise GameSemanticError(f"actions given for undeclared players {sorted(extra)}")
        for i, rule in enumerate(self.payoff.rules):
            if not isinstance(rule.value, int) or isinstance(rule.value, bool):
                raise GameSemanticError(f"rule {i}: payoff must be an integer")
            for p, a in rule.when.items():
                if p not in self.actions:
                    raise GameSemanticError(f"rule {i}: unknown player {p!r}")
                if a not in self.actions[p]:
                    raise GameSemanticError(f"rule {i}: unknown action {a!r} for {p!r}")
        if not isinstance(self.payoff.default, int) or isinstance(self.payoff.default, bool):
            raise GameSemanticError("default payoff must be an integer")

    @property
    def all_players(self) -> tuple[str, ...]:
        return self.team_players + (self.devil_id,)

    @property
    def devil_actions(self) -> tuple[str, ...]:
        return self.actions[self.devil_id]

    def __eq__(self, other):
        if not isinstance(other, Game):
            return NotImplemented
        return (
            self.team_players == other.team_players
            and self.devil_id == other.devil_id
            and dict(self.actions) == dict(other.actions)
            and self.payoff == other.payoff
        )

    __hash__ = None

    @cached_property
    def payoff_table(self) -> np.ndarray:
        """Dense payoffs, shape (|A_p1|, ..., |A_pn|, |A_devil|), int64.

        Filled by writing the rules last-to-first so the first match wins."""
        order = self.all_players
        shape = tuple(len(self.actions[p]) for p in order)
        if int(np.prod(shape, dtype=object)) > MAX_DENSE_ENTRIES:
            raise GameError("payoff table too large to tabulate")
        table = np.full(shape, self.payoff.default, dtype=np.int64)
        pos = {p: i for i, p in enumerate(order)}
        for rule in reversed(self.payoff.rules):
            idx = [slice(None)] * len(order)
            for p, a in rule.when.items():
                idx[pos[p]] = self.actions[p].index(a)
            table[tuple(idx)] = rule.value
        table.setflags(write=False)
        return table

    @cached_property
    def flat_payoffs(self) -> np.ndarray:
        """Payoff table reshaped to (joint team action index, devil action)."""
        t = self.payoff_table
        return t.reshape(-1, t.shape[-1])

    @cached_property
    def joint_strides(self) -> tuple[int, ...]:
        sizes = [len(self.actions[p]) for p in self.team_players]
        strides = []
        acc = 1
        for s in reversed(sizes):
            strides.append(acc)
            acc *= s
        return tuple(reversed(strides))

    def joint_index(self, team_actions: Mapping[str, str]) -> int:
        return sum(
            self.actions[p].index(team_actions[p]) * st
            for p, st in zip(self.team_players, self.joint_strides)
        )

    def max_abs_payoff(self) -> int:
        vals = [abs(r.value) for r in self.payoff.rules] + [abs(self.payoff.default)]
        return max(vals)


def payoff(game: Game, actions: Mapping[str, str]) -> int:
    """Payoff of a full action profile over the team and the Devil."""
    for p in game.all_players:
        if p not in actions:
            raise GameError(f"missing action for {p!r}")
        if actions[p] not in game.actions[p]:
            raise GameError(f"undeclared action {actions[p]!r} for {p!r}")
    return game.payoff.lookup(actions)


@dataclass(frozen=True, eq=False)
class DiceStructure:
    dice: tuple[str, ...] = ()
    access: Mapping[str, frozenset] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "dice", tuple(self.dice))
        object.__setattr__(
            self, "access", {d: frozenset(self.access.get(d, ())) for d in self.dice}
        )
        if len(set(self.dice)) != len(self.dice):
            raise GameSemanticError("duplicate die identifier")

    def __eq__(self, other):
        if not isinstance(other, DiceStructure):
            return NotImplemented
        return self.dice == other.dice and dict(self.access) == dict(other.access)

    __hash__ = None

    def accessible(self, player: str) -> tuple[str, ...]:
        """Dice the player can see, in canonical (sorted) order."""
        return tuple(sorted(d for d in self.dice if player in self.access[d]))


@dataclass(frozen=True, eq=False)
class DicePack:
    dice: tuple[str, ...]
    acc: Mapping[str, int]

    def __post_init__(self):
        object.__setattr__(self, "dice", tuple(self.dice))
        if len(set(self.dice)) != len(self.dice):
            raise GameSemanticError("duplicate die identifier")
        for d in self.dice:
            a = self.acc.get(d)
            if not isinstance(a, int) or a < 0:
                raise GameSemanticError(f"die {d!r}: accessibility must be a nonnegative integer")

    def __eq__(self, other):
        if not isinstance(other, DicePack):
            return NotImplemented
        return self.dice == other.dice and dict(self.acc) == dict(other.acc)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class DiceyGame:
    game: Game
    structure: DiceStructure

    def __post_init__(self):
        report = validate_structure(self.game, self.structure)
        if not report.ok:
            raise GameSemanticError("; ".join(report.violations))

    def __eq__(self, other):
        if not isinstance(other, DiceyGame):
            return NotImplemented
        return self.game == other.game and self.structure == other.structure

    __hash__ = None

    @property
    def dice(self) -> tuple[str, ...]:
        return self.structure.dice

    @property
    def team_players(self) -> tuple[str, ...]:
        return self.game.team_players

    @property
    def devil_actions(self) -> tuple[str, ...]:
        return self.game.devil_actions

    def accessible(self, player: str) -> tuple[str, ...]:
        return self.structure.accessible(player)

    def with_structure(self, structure: DiceStructure) -> "DiceyGame":
        return DiceyGame(self.game, structure)


def validate_structure(
    game: Game, structure: DiceStructure, pack: DicePack | None = None
) -> ValidationReport:
    report = ValidationReport()
    team = set(game.team_players)
    for d in structure.dice:
        for p in sorted(structure.access[d]):
            if p == game.devil_id:
                report.add(f"die {d!r}: the Devil cannot access dice")
            elif p not in team:
                report.add(f"die {d!r}: undeclared player {p!r}")
    if pack is not None:
        for d in structure.dice:
            if d not in pack.acc:
                report.add(f"die {d!r}: not in dice pack")
            elif len(structure.access[d]) > pack.acc[d]:
                report.add(
                    f"die {d!r}: {len(structure.access[d])} players exceed accessibility {pack.acc[d]}"
                )
    return report


# --- documents -------------------------------------------------------------


def _loads(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise GameSyntaxError(e.msg, e.lineno, e.colno) from None


def _expect(cond: bool, msg: str) -> None:
    if not cond:
        raise GameSemanticError(msg)


def _str_list(obj, what: str) -> list[str]:
    _expect(isinstance(obj, list) and all(isinstance(x, str) for x in obj),
            f"{what} must be a list of strings")
    return obj


def game_from_dict(doc: Mapping) -> DiceyGame:
    _expect(isinstance(doc, dict), "game document must be an object")
    players = _str_list(doc.get("players"), "players")
    devil = doc.get("devil", DEFAULT_DEVIL)
    _expect(isinstance(devil, str), "devil must be a string")
    actions = dict(doc.get("actions", {}))
    _expect(all(p in actions for p in players), "every player needs an action list")
    actions = {p: _str_list(actions[p], f"actions of {p}") for p in players}
    actions[devil] = _str_list(doc.get("devil_actions"), "devil_actions")
    extra = set(doc.get("actions", {})) - set(players)
    _expect(not extra, f"actions given for undeclared players {sorted(extra)}")
    pay = doc.get("payoff", {})
    _expect(isinstance(pay, dict), "payoff must be an object")
    rules = []
    for r in pay.get("rules", []):
        _expect(isinstance(r, dict) and isinstance(r.get("when"), dict), "rule needs 'when'")
        rules.append(Rule(dict(r["when"]), r.get("value")))
    game = Game(tuple(players), actions, PayoffRules(tuple(rules), pay.get("default", 0)), devil)
    dice, access = [], {}
    for entry in doc.get("dice", []):
        _expect(isinstance(entry, dict) and isinstance(entry.get("id"), str), "die needs an id")
        did = entry["id"]
        _expect(did not in access, f"duplicate die identifier {did!r}")
        dice.append(did)
        access[did] = _str_list(entry.get("access", []), f"access of {did}")
    return DiceyGame(game, DiceStructure(tuple(dice), access))


def parse_game(text: str) -> DiceyGame:
    return game_from_dict(_loads(text))


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def structure_to_list(structure: DiceStructure) -> list[dict]:
    return [{"id": d, "access": sorted(structure.access[d])} for d in structure.dice]


def game_to_dict(dg: DiceyGame) -> dict:
    g = dg.game
    return {
        "players": list(g.team_players),
        "devil": g.devil_id,
        "devil_actions": list(g.devil_actions),
        "actions": {p: list(g.actions[p]) for p in g.team_players},
        "payoff": {
            "rules": [{"when": dict(r.when), "value": r.value} for r in g.payoff.rules],
            "default": g.payoff.default,
        },
        "dice": structure_to_list(dg.structure),
    }


def serialize_game(dg: DiceyGame) -> str:
    return _canonical(game_to_dict(dg))


def parse_pack(text: str) -> DicePack:
    doc = _loads(text)
    _expect(isinstance(doc, dict) and isinstance(doc.get("dice"), list), "pack needs 'dice'")
    dice, acc = [], {}
    for entry in doc["dice"]:
        _expect(isinstance(entry, dict) and isinstance(entry.get("id"), str), "die needs an id")
        _expect(entry["id"] not in acc, f"duplicate die identifier {entry['id']!r}")
        dice.append(entry["id"])
        acc[entry["id"]] = entry.get("acc")
    return DicePack(tuple(dice), acc)


def serialize_pack(pack: DicePack) -> str:
    return _canonical({"dice": [{"id": d, "acc": pack.acc[d]} for d in pack.dice]})


def matching_pennies(players: Iterable[str], actions=("H", "T"), devil=DEFAULT_DEVIL) -> Game:
    """Team wins (payoff 1) iff every player, Devil included, picks the same action."""
    players = tuple(players)
    everyone = players + (devil,)
    rules = tuple(Rule({p: a for p in everyone}, 1) for a in actions)
    acts = {p: tuple(actions) for p in everyone}
    return Game(players, acts, PayoffRules(rules, 0), devil)


def all_profiles(game: Game):
    """Every full action profile, in lexicographic index order."""
    order = game.all_players
    for combo in itertools.product(*(game.actions[p] for p in order)):
        yield dict(zip(order, combo))
