"""Report artifacts: PRISM models, result tables, theta curves, pattern graphs."""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dtmc import STATE, TRANSITION, Dtmc, RewardStructure, build_dtmc
from .em import AdmixtureModel
from .errors import InputError, ModelFormatError

# Edge-thickness buckets for pattern graphs. Lowest threshold hides edges.
DEFAULT_BUCKETS = (0.05, 0.25, 0.5, 0.75)


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".12g")


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


# -- theta curves ---------------------------------------------------------

@dataclass(frozen=True)
class ThetaCurve:
    k: int
    points: list[tuple[float, float]]


def theta_curve(model: AdmixtureModel, k: int) -> ThetaCurve:
    """Sorted column k (1-based) of theta against rescaled rank in [0, 1]."""
    if not 1 <= k <= model.K:
        raise InputError(f"pattern index {k} outside 1..{model.K}")
    ys = np.sort(model.theta[:, k - 1])
    M = len(ys)
    xs = np.arange(M) / (M - 1) if M > 1 else np.zeros(1)
    return ThetaCurve(k, [(float(x), float(y)) for x, y in zip(xs, ys)])


def theta_curves_csv(model: AdmixtureModel) -> str:
    curves = [theta_curve(model, k) for k in range(1, model.K + 1)]
    header = ["x"] + [f"AP{k}" for k in range(1, model.K + 1)]
    rows = []
    for idx in range(model.M):
        x = curves[0].points[idx][0]
        rows.append([format_value(x)] + [format_value(c.points[idx][1]) for c in curves])
    return _csv_text(header, rows)


# -- PRISM export ---------------------------------------------------------

def _fmt17(v: float) -> str:
    return format(float(v), ".17g")


def export_prism(dtmc: Dtmc, name: str, var: str = "x") -> str:
    """Write a DTMC as a PRISM model: one command per state, labels, rewards.

    Every label must denote a single state. Transition rewards must not
    depend on the target state, since PRISM guards see only the source.
    """
    n = dtmc.n_states
    label_lines = []
    for label, states in dtmc.labels.items():
        if len(states) != 1:
            raise InputError(f"label {label!r} covers {len(states)} states; export needs singletons")
        label_lines.append(f'label "{label}" = ({var}={next(iter(states))});')

    out = ["dtmc", "", f"module {name}", f"  {var} : [0..{n - 1}] init {dtmc.initial};", ""]
    worst = 0.0
    for i, row in enumerate(dtmc.matrix):
        nz = np.flatnonzero(row)
        updates = " + ".join(f"{_fmt17(row[j])}:({var}'={j})" for j in nz)
        out.append(f"  [] ({var}={i}) -> {updates};")
        worst = max(worst, abs(float(row[nz].sum()) - 1.0))
    out += ["endmodule", ""]
    out += label_lines
    out.append("")
    for rname, rs in dtmc.reward_structures.items():
        out.append(f'rewards "{rname}"')
        out += _reward_items(rs, rname, var)
        out.append("endrewards")
        out.append("")
    out.append(f"// zero-probability updates omitted; max |row sum - 1| = {worst:.3g}")
    return "\n".join(out) + "\n"


def _reward_items(rs: RewardStructure, rname: str, var: str) -> list[str]:
    v = rs.values
    if rs.kind == STATE:
        return [f"  ({var}={i}) : {_fmt17(r)};" for i, r in enumerate(v) if r != 0]
    if np.all(v == v.flat[0]):
        return [f"  [] true : {_fmt17(v.flat[0])};"] if v.flat[0] != 0 else []
    if not np.all(v == v[:, :1]):
        raise InputError(f"reward structure {rname!r} depends on the target state")
    return [f"  [] ({var}={i}) : {_fmt17(r)};" for i, r in enumerate(v[:, 0]) if r != 0]


_NUM = r"[0-9.eE+-]+"


def import_prism(text: str) -> tuple[str, Dtmc]:
    """Read back the subset written by :func:`export_prism`."""
    body = re.sub(r"//[^\n]*", "", text)
    m = re.search(r"module\s+(\w+)\s+(\w+)\s*:\s*\[0\s*\.\.\s*(\d+)\]\s*init\s+(\d+)\s*;(.*?)endmodule",
                  body, re.S)
    if m is None:
        raise ModelFormatError("no module declaration found")
    name, var, top, init, commands = m.group(1), m.group(2), int(m.group(3)), int(m.group(4)), m.group(5)
    n = top + 1
    P = np.zeros((n, n))
    seen = set()
    for cm in re.finditer(rf"\[\]\s*\({var}=(\d+)\)\s*->(.*?);", commands, re.S):
        i = int(cm.group(1))
        seen.add(i)
        for um in re.finditer(rf"({_NUM})\s*:\s*\({var}'=(\d+)\)", cm.group(2)):
            P[i, int(um.group(2))] += float(um.group(1))
    if seen != set(range(n)):
        raise ModelFormatError(f"missing commands for states {sorted(set(range(n)) - seen)}")

    labels = {lm.group(1): {int(lm.group(2))}
              for lm in re.finditer(rf'label\s+"([^"]+)"\s*=\s*\({var}=(\d+)\)\s*;', body)}
    rewards = {}
    for rm in re.finditer(r'rewards\s+"([^"]+)"(.*?)endrewards', body, re.S):
        rname, block = rm.group(1), rm.group(2)
        if "[" in block:
            T = np.zeros((n, n))
            for im in re.finditer(rf"\[\]\s*true\s*:\s*({_NUM})\s*;", block):
                T += float(im.group(1))
            for im in re.finditer(rf"\[\]\s*\({var}=(\d+)\)\s*:\s*({_NUM})\s*;", block):
                T[int(im.group(1)), :] += float(im.group(2))
            rewards[rname] = RewardStructure(TRANSITION, T)
        else:
            s = np.zeros(n)
            for im in re.finditer(rf"\({var}=(\d+)\)\s*:\s*({_NUM})\s*;", block):
                s[int(im.group(1))] += float(im.group(2))
            rewards[rname] = RewardStructure(STATE, s)
    return name, build_dtmc(P, init, labels, rewards)


# -- result tables --------------------------------------------------------

@dataclass(frozen=True)
class Cell:
    value: float
    query: str


@dataclass
class ResultTable:
    """Rows keyed by (property id, cut, label); one column per pattern."""

    patterns: list[str]
    rows: list[tuple[tuple[str, str, str], list[Cell]]] = field(default_factory=list)

    def to_csv(self) -> str:
        header = ["property", "cut", "label", "query"] + self.patterns
        body = [[pid, cut, label, cells[0].query if cells else ""]
                + [format_value(c.value) for c in cells]
                for (pid, cut, label), cells in self.rows]
        return _csv_text(header, body)

    def to_wide_csv(self) -> str:
        """Pivot: one row per (property, cut), columns ``label:APk``."""
        labels: list[str] = []
        groups: dict[tuple[str, str], dict[str, list[Cell]]] = {}
        for (pid, cut, label), cells in self.rows:
            if label not in labels:
                labels.append(label)
            groups.setdefault((pid, cut), {})[label] = cells
        header = ["property", "cut"] + [f"{l}:{p}" for l in labels for p in self.patterns]
        body = []
        for (pid, cut), by_label in groups.items():
            row = [pid, cut]
            for l in labels:
                cells = by_label.get(l)
                row += [format_value(c.value) for c in cells] if cells else [""] * len(self.patterns)
            body.append(row)
        return _csv_text(header, body)


def results_table(models: Mapping[str, Sequence[Dtmc]], instances: Sequence,
                  patterns: Sequence[str] | None = None) -> ResultTable:
    """Evaluate each property on every pattern DTMC of every cut.

    ``models`` maps a cut name to that cut's pattern DTMCs; ``instances``
    holds TemplateInstance or RawQuery items. Rows are ordered by property
    id (templates 1-5, then raw queries), then cut in mapping order, then
    item order.
    """
    K = max((len(d) for d in models.values()), default=0)
    names = list(patterns) if patterns is not None else [f"AP{k}" for k in range(1, K + 1)]
    table = ResultTable(names)
    groups = sorted({_pid(inst) for inst in instances}, key=lambda p: (not p.isdigit(), p))
    for pid in groups:
        for cut, dtmcs in models.items():
            for inst in instances:
                if _pid(inst) != pid:
                    continue
                q = inst.query()
                cells = [Cell(inst.evaluate(d), q) for d in dtmcs]
                table.rows.append(((pid, cut, inst.key()), cells))
    return table


def _pid(inst) -> str:
    return "raw" if inst.template_id is None else str(inst.template_id)


def sweep_csv(series_by_pattern: Mapping[str, Sequence[tuple[int, float]]]) -> str:
    names = list(series_by_pattern)
    columns = [series_by_pattern[p] for p in names]
    Ns = [N for N, _ in columns[0]] if columns else []
    rows = [[str(N)] + [format_value(col[r][1]) for col in columns] for r, N in enumerate(Ns)]
    return _csv_text(["N"] + names, rows)


# -- pattern graphs -------------------------------------------------------

@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    probability: float
    bucket: int  # 1 = thinnest


def pattern_graph(dtmc: Dtmc, thresholds: Sequence[float] = DEFAULT_BUCKETS) -> list[Edge]:
    """Edges at or above the lowest threshold, bucketed by probability."""
    th = sorted(thresholds)
    if not th:
        raise InputError("need at least one threshold")
    edges = []
    for i, j in zip(*np.nonzero(dtmc.matrix >= th[0])):
        p = float(dtmc.matrix[i, j])
        bucket = sum(1 for t in th if p >= t)
        edges.append(Edge(int(i), int(j), p, bucket))
    return edges


def to_dot(edges: Sequence[Edge], names: Sequence[str], graph_name: str = "pattern") -> str:
    """Graphviz DOT; ``penwidth`` grows with the bucket."""
    lines = [f'digraph "{graph_name}" {{']
    used = sorted({e.src for e in edges} | {e.dst for e in edges})
    for s in used:
        lines.append(f'  {s} [label="{s}: {names[s]}"];')
    for e in edges:
        lines.append(f'  {e.src} -> {e.dst} [penwidth={e.bucket}, label="{e.probability:.2f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
