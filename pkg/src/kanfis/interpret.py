"""Symbolic IF-THEN rules from a trained model.

Each first-layer unit is a rule. Its antecedents are the features whose mask
value clears a threshold; each antecedent is labelled LOW/MED/HIGH by where the
edge's amplitude-weighted basis center falls relative to the feature's training
terciles. The consequent of rule ``j`` is the head column ``W[:, j]``.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import numerics as nx
from .membership import softplus
from .network import CLASSIFICATION, KanfisModel, layer_forward, model_forward, normalize


@dataclass(frozen=True)
class RuleAntecedent:
    feature: str
    label: str
    mask: float
    coefficient: float  # mask * sum of amplitudes
    center: float  # original feature units


@dataclass(frozen=True)
class RuleReport:
    index: int
    antecedents: tuple
    outer_weights: tuple
    importance: float
    mean_firing: float
    partial: bool = False
    text: str = ""

    @property
    def n_features(self):
        return len(self.antecedents)


def extract_rules(model: KanfisModel, stats: Sequence, X, threshold: float = 0.5,
                  transform=None, max_antecedents: Optional[int] = None) -> list:
    """Rules of the first layer, sorted by descending importance.

    ``stats`` holds one :class:`~kanfis.data.FeatureStats` per input feature in
    original units; ``X`` is model-space input used for mean firing strengths;
    ``transform`` (a fitted standardizer) maps basis centers back to original
    units.
    """
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    if len(stats) != model.n_features:
        raise ValueError(f"model takes {model.n_features} features but {len(stats)} stats were given")
    layer = model.layers[0]
    p = layer.local(model.params)
    mask = 1.0 / (1.0 + np.exp(-p["mask_logits"]))
    amp = softplus(p["amp_raw"])
    amp_sum = amp.sum(axis=2)
    center = (amp * p["center"]).sum(axis=2) / amp_sum
    if transform is not None:
        center = center * transform.scale_[:, None] + transform.mean_[:, None]
    trace = model_forward(model, X)
    firing = trace.firings.mean(axis=0)
    partial = len(model.layers) > 1
    W = first_layer_weights(model, trace.firings) if partial else model.params["head.weight"]

    rules = []
    for j in range(layer.d_out):
        active = [i for i in range(layer.d_in) if mask[i, j] >= threshold]
        if max_antecedents is not None and len(active) > max_antecedents:
            active = sorted(active, key=lambda i: -mask[i, j] * amp_sum[i, j])[:max_antecedents]
            active.sort()
        ants = tuple(
            RuleAntecedent(stats[i].name, stats[i].label(center[i, j]), float(mask[i, j]),
                           float(mask[i, j] * amp_sum[i, j]), float(center[i, j]))
            for i in active
        )
        outer = tuple(float(w) for w in W[:, j])
        importance = float(np.max(np.abs(W[:, j])) * firing[j])
        rule = RuleReport(j, ants, outer, importance, float(firing[j]), partial)
        rules.append(replace(rule, text=render_rule(rule, model.task)))
    if all(not r.antecedents for r in rules):
        warnings.warn("no mask value reaches the threshold; every rule is empty", RuntimeWarning,
                      stacklevel=2)
    rules.sort(key=lambda r: (-r.importance, r.index))
    return rules


def first_layer_weights(model: KanfisModel, firings):
    """Batch-mean sensitivity ``d y_o / d h_j`` of each output to each first-layer unit.

    For a single-layer model this is exactly the head matrix; deeper models
    get the averaged local linearization, shape ``(n_outputs, n_rules)``.
    """
    firings = np.asarray(firings, dtype=np.float64)
    rows = []
    for o in range(model.n_outputs):
        tape = nx.GradTape()
        h1 = tape.watch(firings)
        h = h1
        for i, layer in enumerate(model.layers):
            if i > 0:
                h = layer_forward(layer, normalize(h), model.params)
        out = nx.matmul(h, nx.transpose(model.params["head.weight"][o:o + 1]))
        (g,) = tape.gradient(nx.mean(out), [h1])
        rows.append(g.sum(axis=0))
    return np.array(rows)


def _term(a: RuleAntecedent):
    return f"{a.coefficient:.4f} * M_{a.feature}(x_{a.feature})"


def _body(rule):
    return " + ".join(_term(a) for a in rule.antecedents) or "0"


def _condition(rule):
    return " & ".join(f"{a.feature} is {a.label}" for a in rule.antecedents) or "(no active antecedents)"


def dominant_outputs(weights, max_classes=2, ratio=0.75):
    """Indices of the outputs with the largest |weight|, at most ``max_classes`` of them."""
    w = np.abs(np.asarray(weights))
    order = sorted(range(len(w)), key=lambda c: (-w[c], c))
    keep = [order[0]]
    for c in order[1:max_classes]:
        if w[c] >= ratio * w[order[0]]:
            keep.append(c)
    return keep


def then_lines(rule, task, target_name="y", class_names=None, max_classes=2):
    body = _body(rule)
    if task == CLASSIFICATION:
        names = class_names or [str(c) for c in range(len(rule.outer_weights))]
        return [f"P_{names[c]} = {rule.outer_weights[c]:.4f} * ({body})"
                for c in dominant_outputs(rule.outer_weights, max_classes)]
    return [f"{target_name if len(rule.outer_weights) == 1 else f'{target_name}[{o}]'} = "
            f"{w:.4f} * ({body})" for o, w in enumerate(rule.outer_weights)]


def render_rule(rule, task, target_name="y", class_names=None):
    lines = [f"IF {_condition(rule)}"]
    lines += [f"THEN {t}" for t in then_lines(rule, task, target_name, class_names)]
    return "\n".join(lines)


def render_report(rules, fmt="plain", task="regression", target_name="y", class_names=None) -> str:
    """Deterministic text report, most important rule first."""
    if not rules:
        raise ValueError("no rules to render")
    rules = sorted(rules, key=lambda r: (-r.importance, r.index))
    partial = any(r.partial for r in rules)
    if fmt == "plain":
        out = []
        if partial:
            out.append("(first layer of a multi-layer model; rules are partial)\n")
        for rank, r in enumerate(rules, 1):
            out.append(f"Rule {rank} [unit {r.index}] importance={r.importance:.4f}")
            for line in render_rule(r, task, target_name, class_names).splitlines():
                out.append("  " + line)
            out.append("")
        return "\n".join(out)
    if fmt == "markdown":
        out = []
        if partial:
            out += ["_First layer of a multi-layer model; rules are partial._", ""]
        out += ["| Rank | Unit | IF | THEN | Importance |", "|---:|---:|---|---|---:|"]
        for rank, r in enumerate(rules, 1):
            cond = _condition(r).replace(" & ", " &amp; ")
            then = "<br>".join(then_lines(r, task, target_name, class_names))
            out.append(f"| {rank} | {r.index} | {cond} | {then} | {r.importance:.4f} |")
        return "\n".join(out) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def feature_count_stats(rules) -> dict:
    counts = [r.n_features for r in rules]
    return {"mean": float(np.mean(counts)) if counts else 0.0, "counts": counts}


def write_feature_counts(rules, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rule", "unit", "n_features", "importance"])
        for rank, r in enumerate(rules, 1):
            w.writerow([rank, r.index, r.n_features, repr(r.importance)])
