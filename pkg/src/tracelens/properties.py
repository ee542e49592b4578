"""The five activity-pattern property templates, and N sweeps over them.

Each template is a query string in the property grammar, so results can be
audited against the exact text that was checked.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator

from .dtmc import Dtmc
from .errors import InputError, PropertySyntaxError
from .ingest import DEFAULT_STOP
from .pctl import check, parse_property
from .pctl.parser import strip_comment

DEFAULT_N = 50

# Higher-is-better readings, emitted as report annotations only.
INTERPRETATION = {
    1: "higher probability of reaching the view is better",
    2: "more expected visits to the view is better",
    3: "fewer (non-zero) expected steps to reach the view is better",
}


def prop1_query(l: str, N: int) -> str:
    return f'P=? [ !"{l}" U<={N} "{l}" ]'


def prop2_query(l: str, N: int) -> str:
    return f'R{{"r_{l}"}}=? [ C<={N} ]'


def prop3_query(l: str) -> str:
    return f'R{{"r_Steps"}}=? [ F "{l}" ]'


def prop4_query(l1: str, l2: str, N: int, stop: str = DEFAULT_STOP) -> str:
    return f'filter(state, P=? [ (!"{l1}" & !"{stop}") U<={N} "{l1}" ], "{l2}")'


def prop5_query(l1: str, l2: str) -> str:
    return f'filter(state, R{{"r_Steps"}}=? [ F "{l1}" ], "{l2}")'


@dataclass(frozen=True)
class TemplateInstance:
    template_id: int
    label: str
    label2: str | None = None
    N: int | None = DEFAULT_N

    def __post_init__(self) -> None:
        if self.template_id not in (1, 2, 3, 4, 5):
            raise InputError(f"unknown template {self.template_id}; expected 1..5")
        if self.template_id in (4, 5) and self.label2 is None:
            raise InputError(f"template {self.template_id} needs two labels")
        if self.uses_n and (self.N is None or self.N < 1):
            raise InputError("step bound N must be at least 1")

    @property
    def uses_n(self) -> bool:
        return self.template_id in (1, 2, 4)

    def with_n(self, N: int) -> "TemplateInstance":
        return TemplateInstance(self.template_id, self.label, self.label2, N)

    def query(self) -> str:
        t, l, l2, N = self.template_id, self.label, self.label2, self.N
        if t == 1:
            return prop1_query(l, N)
        if t == 2:
            return prop2_query(l, N)
        if t == 3:
            return prop3_query(l)
        if t == 4:
            return prop4_query(l, l2, N)
        return prop5_query(l, l2)

    def evaluate(self, dtmc: Dtmc) -> float:
        for name in filter(None, (self.label, self.label2)):
            if name not in dtmc.labels:
                raise InputError(f"unknown label {name!r}")
        return check(dtmc, self.query()).value

    def key(self) -> str:
        return self.label if self.label2 is None else f"{self.label}|{self.label2}"


@dataclass(frozen=True)
class RawQuery:
    """A property-file line in the raw grammar, tabulated like a template."""

    text: str
    template_id = None

    def query(self) -> str:
        return self.text

    def key(self) -> str:
        return ""

    def evaluate(self, dtmc: Dtmc):
        return check(dtmc, self.text).value


def prop1_reach_first(dtmc: Dtmc, l: str, N: int) -> float:
    return TemplateInstance(1, l, None, N).evaluate(dtmc)


def prop2_expected_visits(dtmc: Dtmc, l: str, N: int) -> float:
    return TemplateInstance(2, l, None, N).evaluate(dtmc)


def prop3_expected_steps(dtmc: Dtmc, l: str) -> float:
    return TemplateInstance(3, l, None, None).evaluate(dtmc)


def prop4_reach_within_session(dtmc: Dtmc, l1: str, l2: str, N: int) -> float:
    return TemplateInstance(4, l1, l2, N).evaluate(dtmc)


def prop5_steps_between(dtmc: Dtmc, l1: str, l2: str) -> float:
    return TemplateInstance(5, l1, l2, None).evaluate(dtmc)


@dataclass(frozen=True)
class SweepSpec:
    instance: TemplateInstance
    start: int = 10
    stop: int = 150
    step: int = 10

    def __post_init__(self) -> None:
        if self.start > self.stop or self.step <= 0 or self.start < 1:
            raise InputError(f"bad N range {self.start}:{self.stop}:{self.step}")
        if not self.instance.uses_n:
            raise InputError(f"template {self.instance.template_id} has no step bound to sweep")

    @classmethod
    def parse_range(cls, instance: TemplateInstance, text: str) -> "SweepSpec":
        try:
            a, b, s = (int(x) for x in text.split(":"))
        except ValueError:
            raise InputError(f"bad N range {text!r}; expected start:stop:step") from None
        return cls(instance, a, b, s)

    def values(self) -> range:
        return range(self.start, self.stop + 1, self.step)


def run_sweep(spec: SweepSpec, dtmc: Dtmc) -> list[tuple[int, float]]:
    return [(N, spec.instance.with_n(N).evaluate(dtmc)) for N in spec.values()]


# -- property files -------------------------------------------------------

_SHORTHAND = re.compile(r"^prop([1-5])\s*\((.*)\)\s*$")


@dataclass(frozen=True)
class PropertyLine:
    line: int
    source: str
    instance: TemplateInstance | None = None
    sweep: SweepSpec | None = None
    ast: object = None

    @property
    def query(self) -> str:
        if self.instance is not None:
            return self.instance.query()
        return self.source

    def check_item(self):
        return self.instance if self.instance is not None else RawQuery(self.source)


def _parse_shorthand(tid: int, args: str, lineno: int, source: str):
    parts = [p.strip() for p in args.split(",")] if args.strip() else []
    labels = [p[1:-1] for p in parts if len(p) >= 2 and p[0] == p[-1] == '"']
    rest = [p for p in parts if not (len(p) >= 2 and p[0] == p[-1] == '"')]
    need_labels = 2 if tid in (4, 5) else 1
    need_n = tid in (1, 2, 4)
    if len(labels) != need_labels or len(rest) != (1 if need_n else 0):
        raise PropertySyntaxError(
            f"prop{tid} takes {need_labels} quoted label(s)" + (" and N or a:b:s" if need_n else ""),
            0, source, lineno)
    label2 = labels[1] if need_labels == 2 else None
    if not need_n:
        return TemplateInstance(tid, labels[0], label2, None), None
    if ":" in rest[0]:
        base = TemplateInstance(tid, labels[0], label2, DEFAULT_N)
        return base, SweepSpec.parse_range(base, rest[0])
    try:
        N = int(rest[0])
    except ValueError:
        raise PropertySyntaxError(f"bad step bound {rest[0]!r}", 0, source, lineno) from None
    return TemplateInstance(tid, labels[0], label2, N), None


def parse_property_lines(text: str) -> list[PropertyLine]:
    """Parse a property file mixing raw queries and template shorthands.

    Shorthands: ``prop1("l", 50)``, ``prop2("l", 10:150:10)``, ``prop3("l")``,
    ``prop4("l1", "l2", 50)``, ``prop5("l1", "l2")``. A ``a:b:s`` bound
    requests a sweep.
    """
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = strip_comment(raw).strip()
        if not line:
            continue
        m = _SHORTHAND.match(line)
        if m:
            instance, sweep = _parse_shorthand(int(m.group(1)), m.group(2), lineno, line)
            out.append(PropertyLine(lineno, line, instance, sweep))
            continue
        try:
            ast = parse_property(line)
        except PropertySyntaxError as exc:
            raise PropertySyntaxError(str(exc).rsplit(" at position", 1)[0], exc.position,
                                      line, lineno) from None
        out.append(PropertyLine(lineno, line, ast=ast))
    return out


def standard_suite(labels, N: int = DEFAULT_N) -> Iterator[TemplateInstance]:
    """Templates 1-3 on each label, grouped by template."""
    for tid in (1, 2, 3):
        for l in labels:
            yield TemplateInstance(tid, l, None, N if tid != 3 else None)
