"""SPICE card netlists: designator/value assignment, emission, parsing, and
structural equivalence (node-renaming invariant comparison)."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional

from .detect import Component, ComponentType, Flag, FlagKind, TERMINAL_ROLES

PREFIX_FOR_TYPE = {
    ComponentType.resistor: "R",
    ComponentType.capacitor: "C",
    ComponentType.inductor: "L",
    ComponentType.diode: "D",
    ComponentType.voltage_source: "V",
    ComponentType.current_source: "I",
    ComponentType.npn: "Q",
    ComponentType.pnp: "Q",
    ComponentType.nmos: "M",
    ComponentType.pmos: "M",
}

DEFAULT_VALUE = {
    ComponentType.resistor: 1e3,
    ComponentType.capacitor: 1e-6,
    ComponentType.inductor: 1e-3,
    ComponentType.voltage_source: 1.0,
    ComponentType.current_source: 1e-3,
}

DEFAULT_MODEL = {
    ComponentType.diode: "DDEF",
    ComponentType.npn: "QNPN",
    ComponentType.pnp: "QPNP",
    ComponentType.nmos: "MNMOS",
    ComponentType.pmos: "MPMOS",
}

MODEL_KIND = {"DDEF": "D", "QNPN": "NPN", "QPNP": "PNP", "MNMOS": "NMOS", "MPMOS": "PMOS"}

VALUE_TOLERANCE = 1e-9  # relative
MAX_EQUIV_NODES = 64

_MULTIPLIERS = {
    "p": 1e-12, "n": 1e-9, "u": 1e-6, "µ": 1e-6,
    "m": 1e-3, "k": 1e3, "K": 1e3, "Meg": 1e6, "MEG": 1e6, "meg": 1e6, "G": 1e9, "g": 1e9,
    "P": 1e-12, "N": 1e-9, "U": 1e-6,
}

# ordered for canonical formatting (mantissa lands in [1, 1000))
_FORMAT_SUFFIXES = [(1e9, "G"), (1e6, "Meg"), (1e3, "k"), (1.0, ""), (1e-3, "m"),
                    (1e-6, "u"), (1e-9, "n"), (1e-12, "p")]


class ValueSyntaxError(ValueError):
    pass


_VALUE_RE = re.compile(r"^([0-9]+(?:\.[0-9]+)?)\s*([A-Za-zµ]*)$")


def parse_value(token: str, unit_words: bool = False) -> float:
    """Parse `10k` / `4.7u` / `100` into a base-unit float.

    Bare `M` is rejected as ambiguous (milli vs mega). With unit_words, a
    trailing unit (Ω/Ohm/F/H/V/A) after the multiplier is accepted and
    discarded.
    """
    m = _VALUE_RE.match(token.strip())
    if not m:
        raise ValueSyntaxError(f"malformed value {token!r}")
    magnitude = float(m.group(1))
    suffix = m.group(2)
    if unit_words:
        for word in ("Ohms", "Ohm", "ohms", "ohm", "Ω", "F", "f", "H", "h", "V", "v", "A", "a"):
            if suffix.endswith(word) and suffix != word[:0]:
                trimmed = suffix[: -len(word)]
                # only strip when what remains is empty or a known multiplier
                if trimmed == "" or trimmed in _MULTIPLIERS or trimmed.lower() == "meg":
                    suffix = trimmed
                    break
    if suffix == "":
        return magnitude
    if suffix == "M":
        raise ValueSyntaxError("bare 'M' multiplier is ambiguous (milli vs Meg)")
    if suffix.lower() == "meg":
        return magnitude * 1e6
    if suffix in _MULTIPLIERS:
        return magnitude * _MULTIPLIERS[suffix]
    raise ValueSyntaxError(f"unknown multiplier {suffix!r} in {token!r}")


def format_value(value: float) -> str:
    """Canonical SI-suffixed rendering; parse_value(format_value(v)) == v for
    values expressible with <= 6 significant digits."""
    if value <= 0:
        raise ValueError("values must be positive")
    for factor, suffix in _FORMAT_SUFFIXES:
        mant = value / factor
        if 1.0 - 1e-12 <= mant < 1000.0 - 1e-9:
            text = f"{mant:.6g}"
            if "." in text:
                text = text.rstrip("0").rstrip(".")
            return text + suffix
    return f"{value:.6g}"


def values_close(a: Optional[float], b: Optional[float]) -> bool:
    if a is None or b is None:
        return a is b
    return math.isclose(a, b, rel_tol=VALUE_TOLERANCE, abs_tol=0.0)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Card:
    designator: str
    ctype: ComponentType
    nodes: tuple[str, ...]
    value: Optional[float] = None
    model: Optional[str] = None

    @property
    def prefix(self) -> str:
        return self.designator[0]

    @property
    def index(self) -> int:
        return int(self.designator[1:])

    def line(self) -> str:
        parts = [self.designator, *self.nodes]
        if self.model is not None:
            parts.append(self.model)
        elif self.value is not None:
            parts.append(format_value(self.value))
        return " ".join(parts)


@dataclass
class Netlist:
    title: str
    cards: list[Card]
    models: set[str] = field(default_factory=set)

    def nodes(self) -> list[str]:
        seen: dict[str, None] = {}
        for card in self.cards:
            for n in card.nodes:
                seen.setdefault(n)
        return list(seen)


class EmissionError(ValueError):
    pass


class ParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


# ---------------------------------------------------------------------------
# designator / value assignment

@dataclass
class Assignment:
    designator: str
    value: Optional[float] = None
    model: Optional[str] = None
    value_text: Optional[str] = None  # the bound raw string, for text scoring


def assign_designators(comps: list[Component], bindings) -> tuple[dict[int, Assignment], list[Flag]]:
    """Deterministic rule engine for final designators and values.

    Bound, parseable designators stick when the prefix matches the type;
    everything else is auto-numbered with the smallest unused index per
    prefix in ascending (y, x) order. Missing values fall back to the type
    default and raise a missing_value flag.
    """
    flags: list[Flag] = []
    by_comp = {b.component_id: b for b in bindings}
    ordered = sorted(
        (c for c in comps if c.ctype is not ComponentType.ground),
        key=lambda c: (c.bbox.y, c.bbox.x, c.id),
    )
    taken: dict[str, set[int]] = {}
    chosen: dict[int, Assignment] = {}
    # pass 1: accept valid bound designators
    for comp in ordered:
        binding = by_comp.get(comp.id)
        parsed = binding.parsed if binding is not None else None
        want = PREFIX_FOR_TYPE[comp.ctype]
        if parsed is None:
            continue
        if parsed.prefix != want:
            flags.append(Flag(
                kind=FlagKind.prefix_conflict, subject=comp.id,
                detail=f"label {parsed.prefix}{parsed.index} conflicts with "
                       f"{comp.ctype.value} (expected prefix {want}); auto-renamed",
            ))
            continue
        if parsed.index in taken.setdefault(want, set()):
            flags.append(Flag(
                kind=FlagKind.prefix_conflict, subject=comp.id,
                detail=f"duplicate designator {want}{parsed.index}; auto-renamed",
            ))
            continue
        taken[want].add(parsed.index)
        chosen[comp.id] = Assignment(designator=f"{want}{parsed.index}")
    # pass 2: auto-number the rest
    for comp in ordered:
        if comp.id in chosen:
            continue
        prefix = PREFIX_FOR_TYPE[comp.ctype]
        used = taken.setdefault(prefix, set())
        idx = 1
        while idx in used:
            idx += 1
        used.add(idx)
        chosen[comp.id] = Assignment(designator=f"{prefix}{idx}")
    # pass 3: values / models
    for comp in ordered:
        a = chosen[comp.id]
        binding = by_comp.get(comp.id)
        vtext = binding.value_string if binding is not None else None
        if comp.ctype in DEFAULT_MODEL:
            expected = DEFAULT_MODEL[comp.ctype]
            if vtext is not None and vtext.upper() == expected:
                a.model = expected
                a.value_text = vtext
            else:
                a.model = expected
                flags.append(Flag(
                    kind=FlagKind.missing_value, subject=comp.id,
                    detail=f"{a.designator}: no model label; defaulted to {expected}",
                ))
        else:
            value = None
            if vtext is not None:
                try:
                    value = parse_value(vtext, unit_words=True)
                except ValueSyntaxError:
                    value = None
            if value is not None:
                a.value = value
                a.value_text = vtext
            else:
                a.value = DEFAULT_VALUE[comp.ctype]
                flags.append(Flag(
                    kind=FlagKind.missing_value, subject=comp.id,
                    detail=f"{a.designator}: no value label; "
                           f"defaulted to {format_value(a.value)}",
                ))
    return chosen, flags


# ---------------------------------------------------------------------------
# emission

def _card_sort_key(card: Card):
    return (card.prefix, card.index)


def build_cards(nodemap, comps: list[Component], assignments: dict[int, "Assignment"],
                allow_unbound: bool = False) -> Netlist:
    cards = []
    models = set()
    for comp in comps:
        if comp.ctype is ComponentType.ground:
            continue
        a = assignments[comp.id]
        bound = dict(nodemap.bindings.get(comp.id, []))
        roles = TERMINAL_ROLES[comp.ctype]
        try:
            nodes = tuple(bound.get(r, f"NC_{a.designator}_{r.upper()}")
                          if allow_unbound else bound[r] for r in roles)
        except KeyError as exc:
            raise EmissionError(
                f"{a.designator}: terminal {exc.args[0]} is not bound to a node"
            ) from None
        if comp.ctype in (ComponentType.nmos, ComponentType.pmos):
            nodes = nodes + (nodes[-1],)  # bulk tied to source
        card = Card(designator=a.designator, ctype=comp.ctype, nodes=nodes,
                    value=a.value, model=a.model)
        cards.append(card)
        if a.model is not None:
            models.add(a.model)
    cards.sort(key=_card_sort_key)
    return Netlist(title="* generated netlist", cards=cards, models=models)


def emit_netlist(nodemap, comps, assignments, unresolved_flags=(), force: bool = False) -> tuple[Netlist, str]:
    """Render the final SPICE text (LF endings, single spaces, `.end` last).

    Unresolved dangling_terminal flags block emission unless forced.
    """
    blocking = [f for f in unresolved_flags
                if f.kind is FlagKind.dangling_terminal and f.resolution is None]
    if blocking and not force:
        details = "; ".join(f.detail for f in blocking)
        raise EmissionError(f"unresolved dangling terminals: {details}")
    # past the gate the dangling terminals were reviewed (accepted or forced);
    # still-unbound terminals become distinct no-connect placeholder nodes
    net = build_cards(nodemap, comps, assignments, allow_unbound=True)
    return net, netlist_text(net)


def netlist_text(net: Netlist) -> str:
    lines = [net.title]
    lines += [card.line() for card in sorted(net.cards, key=_card_sort_key)]
    lines += [f".model {m} {MODEL_KIND[m]}" for m in sorted(net.models)]
    lines.append(".end")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# parsing

_CARD_NODE_COUNT = {"R": 2, "C": 2, "L": 2, "D": 2, "V": 2, "I": 2, "Q": 3, "M": 4}
_MODEL_CARDS = {"D", "Q", "M"}


def _ctype_for(letter: str, model: Optional[str]) -> ComponentType:
    basic = {
        "R": ComponentType.resistor, "C": ComponentType.capacitor,
        "L": ComponentType.inductor, "V": ComponentType.voltage_source,
        "I": ComponentType.current_source, "D": ComponentType.diode,
    }
    if letter in basic:
        return basic[letter]
    up = (model or "").upper()
    if letter == "Q":
        return ComponentType.pnp if "PNP" in up else ComponentType.npn
    return ComponentType.pmos if "PMOS" in up else ComponentType.nmos


def parse_netlist(text: str) -> Netlist:
    """Parse the emit_netlist dialect (case-insensitive, `*` comments,
    `.model`, `.end`); values normalized to base units."""
    title = ""
    cards: list[Card] = []
    models: set[str] = set()
    ended = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("*"):
            if lineno == 1:
                title = line
            continue
        if ended:
            raise ParseError("content after .end", lineno)
        if line.startswith("."):
            tokens = line.split()
            directive = tokens[0].lower()
            if directive == ".end":
                ended = True
                continue
            if directive == ".model":
                if len(tokens) < 3:
                    raise ParseError(".model needs a name and a kind", lineno)
                models.add(tokens[1].upper())
                continue
            raise ParseError(f"unsupported directive {tokens[0]}", lineno)
        tokens = line.split()
        designator = tokens[0].upper()
        letter = designator[0]
        if letter not in _CARD_NODE_COUNT:
            raise ParseError(f"unsupported card {letter} at line {lineno}", lineno)
        if not designator[1:].isdigit():
            raise ParseError(f"bad designator {tokens[0]!r}", lineno)
        n_nodes = _CARD_NODE_COUNT[letter]
        if len(tokens) != 1 + n_nodes + 1:
            raise ParseError(
                f"{letter} card wants {n_nodes} nodes and one value/model, "
                f"got {len(tokens) - 1} fields", lineno)
        nodes = tuple(t.upper() for t in tokens[1 : 1 + n_nodes])
        last = tokens[1 + n_nodes]
        if letter in _MODEL_CARDS:
            model, value = last.upper(), None
        else:
            model = None
            try:
                value = parse_value(last)
            except ValueSyntaxError as exc:
                raise ParseError(str(exc), lineno) from None
        cards.append(Card(
            designator=designator, ctype=_ctype_for(letter, model),
            nodes=nodes, value=value, model=model,
        ))
    cards.sort(key=_card_sort_key)
    return Netlist(title=title or "* generated netlist", cards=cards,
                   models={c.model for c in cards if c.model} | models)


# ---------------------------------------------------------------------------
# structural equivalence

@dataclass
class EquivalenceResult:
    equivalent: bool
    node_mapping: Optional[dict[str, str]] = None
    mismatch_reason: Optional[str] = None


class CapacityError(ValueError):
    pass


# unpolarized two-terminal types: node order carries no meaning, so their
# cards compare as unordered pairs (a mirrored but electrically identical
# schematic must still test equivalent)
SYMMETRIC_TYPES = frozenset(
    {ComponentType.resistor, ComponentType.capacitor, ComponentType.inductor}
)


def _node_signature(net: Netlist, ignore_values: bool) -> dict[str, tuple]:
    sig: dict[str, list] = {n: [] for n in net.nodes()}
    for card in net.cards:
        symmetric = card.ctype in SYMMETRIC_TYPES
        for pos, node in enumerate(card.nodes):
            val = None if ignore_values else card.value
            sig[node].append((card.ctype.value, 0 if symmetric else pos, card.model, val))
    return {n: tuple(sorted(s, key=repr)) for n, s in sig.items()}


def _cards_match(a: Card, b: Card, mapping: dict[str, str], ignore_values: bool) -> bool:
    if a.ctype is not b.ctype or a.model != b.model:
        return False
    if not ignore_values and not values_close(a.value, b.value):
        return False
    mapped = tuple(mapping[n] for n in a.nodes)
    if a.ctype in SYMMETRIC_TYPES:
        return sorted(mapped) == sorted(b.nodes)
    return mapped == b.nodes


def _multiset_equal(a_cards, b_cards, mapping, ignore_values) -> bool:
    remaining = list(b_cards)
    for card in a_cards:
        for i, other in enumerate(remaining):
            if _cards_match(card, other, mapping, ignore_values):
                remaining.pop(i)
                break
        else:
            return False
    return not remaining


def netlists_equivalent(a: Netlist, b: Netlist, ignore_values: bool = False) -> EquivalenceResult:
    """Search for a node bijection making the card multisets equal.

    "0" must map to "0"; values compare within 1e-9 relative tolerance and
    designator indices are ignored. Instances above 64 nodes raise
    CapacityError rather than guessing.
    """
    nodes_a, nodes_b = a.nodes(), b.nodes()
    if len(nodes_a) > MAX_EQUIV_NODES or len(nodes_b) > MAX_EQUIV_NODES:
        raise CapacityError("netlist exceeds the 64-node equivalence cap")
    if len(a.cards) != len(b.cards):
        return EquivalenceResult(False, mismatch_reason="card counts differ")
    if len(nodes_a) != len(nodes_b):
        return EquivalenceResult(False, mismatch_reason="node counts differ")
    if ("0" in nodes_a) != ("0" in nodes_b):
        return EquivalenceResult(False, mismatch_reason="only one netlist uses ground")
    sig_a = _node_signature(a, ignore_values)
    sig_b = _node_signature(b, ignore_values)
    if sorted(sig_a.values(), key=repr) != sorted(sig_b.values(), key=repr):
        return EquivalenceResult(False, mismatch_reason="node signatures differ")
    order = sorted(nodes_a, key=lambda n: (-len(sig_a[n]), n))
    mapping: dict[str, str] = {}
    used: set[str] = set()
    if "0" in nodes_a:
        mapping["0"] = "0"
        used.add("0")
        order = [n for n in order if n != "0"]

    def backtrack(i: int) -> bool:
        if i == len(order):
            return _multiset_equal(a.cards, b.cards, mapping, ignore_values)
        node = order[i]
        for cand in nodes_b:
            if cand in used or cand == "0" or sig_b[cand] != sig_a[node]:
                continue
            mapping[node] = cand
            used.add(cand)
            if backtrack(i + 1):
                return True
            del mapping[node]
            used.discard(cand)
        return False

    if backtrack(0):
        return EquivalenceResult(True, node_mapping=dict(mapping))
    return EquivalenceResult(False, mismatch_reason="no node bijection matches the cards")


def max_common_cards(golden: Netlist, other: Netlist, ignore_values: bool = False,
                     budget: int = 200_000) -> int:
    """Largest count of golden cards reproducible in `other` under the best
    node mapping ("0" pinned). Deterministic branch-and-bound with a step
    budget; returns the best found when the budget runs out."""
    nodes_g = [n for n in golden.nodes() if n != "0"]
    nodes_o = [n for n in other.nodes() if n != "0"]
    if len(nodes_g) > MAX_EQUIV_NODES or len(nodes_o) > MAX_EQUIV_NODES:
        raise CapacityError("netlist exceeds the 64-node equivalence cap")
    sig_g = _node_signature(golden, ignore_values)
    order = sorted(nodes_g, key=lambda n: (-len(sig_g[n]), n))
    best = 0
    steps = 0

    def count_matches(mapping: dict[str, str]) -> int:
        remaining = list(other.cards)
        matched = 0
        for card in golden.cards:
            if not all(n in mapping for n in card.nodes):
                continue
            for i, cand in enumerate(remaining):
                if _cards_match(card, cand, mapping, ignore_values):
                    remaining.pop(i)
                    matched += 1
                    break
        return matched

    total = len(golden.cards)
    mapping: dict[str, str] = {"0": "0"}

    def backtrack(i: int):
        nonlocal best, steps
        if steps > budget or best == total:
            return
        steps += 1
        if i == len(order):
            best = max(best, count_matches(mapping))
            return
        # bound: even mapping everything else perfectly cannot beat best
        # (cheap bound: total cards)
        node = order[i]
        cands = [c for c in nodes_o if c not in mapping.values()]
        for cand in cands:
            mapping[node] = cand
            backtrack(i + 1)
            del mapping[node]
        # also allow leaving the node unmapped
        backtrack(i + 1)

    backtrack(0)
    return best
