"""Features as reusable patches, and conflict detection between them.

A feature patch is a named, ordered sequence of transformation rule
applications against a named subject machine.  Applying a patch folds
`apply_rule` over the sequence, so a successfully applied feature is a
bounded refinement of the machine it was applied to, by construction.

Two features are in conflict when they cannot be combined: there is no
common machine that refines both single-feature extensions.  The decision
procedure tries both application orders:

* not-independent — one of the features does not apply to the base machine on
  its own, or the two patches introduce the same state or transition name
  (they contend for it rather than compose).
* compatible — some order applies cleanly and the combined machine passes
  `check_refinement` from both single-feature machines; if both orders work,
  their results must additionally be bounded-trace-equivalent.
* conflicting — everything else, with the failing side condition or the
  failing refinement verdict as evidence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .interp import Bounds, DEFAULT_BOUNDS, TraceSet, bounds_to_json, traces
from .model import Environment, Std
from .refine import (
    AddStates,
    AddTransitions,
    RuleApplication,
    RuleError,
    SplitState,
    apply_rule,
    trace_equivalence,
    trace_inclusion,
)


@dataclass(frozen=True)
class FeaturePatch:
    """A named sequence of rule applications against one subject machine."""

    name: str
    subject: str
    applications: tuple[RuleApplication, ...]


class FeatureApplyError(RuleError):
    """A rule application inside a feature patch failed; records which one."""

    def __init__(self, feature: str, index: int, cause: RuleError) -> None:
        super().__init__(
            cause.rule,
            f"feature {feature!r}, application #{index + 1} ({cause.rule}): {cause.reason}",
            cause.witness,
        )
        self.feature = feature
        self.index = index
        self.cause = cause


def apply_feature(
    std: Std,
    patch: FeaturePatch,
    env: Environment,
    bounds: Bounds = DEFAULT_BOUNDS,
) -> Std:
    """Fold the patch over the machine; the machine's name is retained.
    Raises FeatureApplyError naming the first failing application."""
    if patch.subject != std.name:
        raise ValueError(
            f"feature {patch.name!r} is written against {patch.subject!r}, "
            f"not {std.name!r}"
        )
    if not patch.applications:
        raise ValueError(f"feature {patch.name!r} contains no rule applications")
    work = std
    for i, app in enumerate(patch.applications):
        try:
            work = apply_rule(work, app, env, bounds)
        except RuleError as exc:
            raise FeatureApplyError(patch.name, i, exc) from exc
    return work


def introduced_state_names(patch: FeaturePatch) -> frozenset[str]:
    names: set[str] = set()
    for app in patch.applications:
        if isinstance(app, AddStates):
            names.update(app.names)
        elif isinstance(app, SplitState):
            names.update(app.parts)
    return frozenset(names)


def introduced_labels(patch: FeaturePatch) -> frozenset[str]:
    labels: set[str] = set()
    for app in patch.applications:
        payload = ()
        if isinstance(app, AddTransitions):
            payload = app.transitions
        elif isinstance(app, AddStates):
            payload = app.transitions
        labels.update(t.label for t in payload if t.label is not None)
    return frozenset(labels)


@dataclass
class ConflictReport:
    """Outcome of conflict detection (or of a failed integration chain)."""

    verdict: str  # "not-independent" | "conflicting" | "compatible"
    base: str
    features: tuple[str, ...]
    evidence: tuple[str, ...]
    bounds: Bounds
    merged: Optional[Std] = None

    @property
    def is_conflict(self) -> bool:
        return self.verdict != "compatible"

    def describe(self) -> str:
        lines = [
            f"features {', '.join(self.features)} on {self.base}: {self.verdict} "
            f"(bounds: {self.bounds.describe()})"
        ]
        lines.extend(f"  {e}" for e in self.evidence)
        return "\n".join(lines)


def detect_conflict(
    std: Std,
    f1: FeaturePatch,
    f2: FeaturePatch,
    env: Environment,
    bounds: Bounds = DEFAULT_BOUNDS,
) -> ConflictReport:
    """Decide whether two features can be combined over `std` (see the module
    docstring for the three verdicts)."""

    def report(verdict: str, evidence: list[str], merged: Optional[Std] = None) -> ConflictReport:
        return ConflictReport(
            verdict=verdict,
            base=std.name,
            features=(f1.name, f2.name),
            evidence=tuple(evidence),
            bounds=bounds,
            merged=merged,
        )

    # Independence: each feature must apply to the base machine on its own.
    singles: dict[str, Std] = {}
    for f in (f1, f2):
        try:
            singles[f.name] = apply_feature(std, f, env, bounds)
        except RuleError as exc:
            return report(
                "not-independent",
                [f"feature {f.name!r} does not apply to {std.name}: {exc}"],
            )

    shared_states = introduced_state_names(f1) & introduced_state_names(f2)
    if shared_states:
        which = sorted(shared_states)[0]
        return report(
            "not-independent",
            [f"both features introduce a state named {which!r}"],
        )
    shared_labels = introduced_labels(f1) & introduced_labels(f2)
    if shared_labels:
        which = sorted(shared_labels)[0]
        return report(
            "not-independent",
            [f"both features introduce a transition labeled {which!r}"],
        )

    s1, s2 = singles[f1.name], singles[f2.name]
    ts_cache: dict[int, TraceSet] = {}

    def ts_of(machine: Std) -> TraceSet:
        key = id(machine)
        if key not in ts_cache:
            ts_cache[key] = traces(machine, env, bounds)
        return ts_cache[key]

    evidence: list[str] = []

    def try_order(first: FeaturePatch, onto: Std, label: str):
        """Apply `first` on top of `onto`; return the combined machine if it
        applies and refines both single-feature machines."""
        try:
            combined = apply_feature(onto, first, env, bounds)
        except RuleError as exc:
            evidence.append(f"order {label}: {exc}")
            return None
        for single in (s1, s2):
            verdict = trace_inclusion(ts_of(single), ts_of(combined))
            if not verdict.ok:
                evidence.append(
                    f"order {label}: combined machine does not refine the "
                    f"machine with only one feature; {verdict.describe()}"
                )
                return None
        evidence.append(f"order {label}: applies and refines both single-feature machines")
        return combined

    t12 = try_order(f2, s1, f"{f1.name} then {f2.name}")
    t21 = try_order(f1, s2, f"{f2.name} then {f1.name}")

    if t12 is not None and t21 is not None:
        eq = trace_equivalence(ts_of(t12), ts_of(t21))
        if not eq.ok:
            evidence.append(
                f"the two orders disagree observably; {eq.describe()}"
            )
            return report("conflicting", evidence)
        evidence.append("both orders agree (bounded-trace-equivalent)")
        return report("compatible", evidence, merged=t12)
    if t12 is not None:
        return report("compatible", evidence, merged=t12)
    if t21 is not None:
        return report("compatible", evidence, merged=t21)
    return report("conflicting", evidence)


def integrate_chain(
    std: Std,
    patches: tuple[FeaturePatch, ...],
    env: Environment,
    bounds: Bounds = DEFAULT_BOUNDS,
):
    """Apply the patches in order.  On success returns the integrated machine
    after certifying that it refines the original; on failure returns a
    ConflictReport naming the failing patch."""
    if not patches:
        return std
    work = std
    applied: list[str] = []
    for i, patch in enumerate(patches):
        try:
            work = apply_feature(work, patch, env, bounds)
        except (RuleError, ValueError) as exc:
            ev = [f"patch #{i + 1} ({patch.name!r}) failed: {exc}"]
            if applied:
                ev.append("applied so far: " + ", ".join(applied))
            return ConflictReport(
                verdict="conflicting",
                base=std.name,
                features=tuple(p.name for p in patches),
                evidence=tuple(ev),
                bounds=bounds,
            )
        applied.append(patch.name)
    certificate = trace_inclusion(traces(std, env, bounds), traces(work, env, bounds))
    if not certificate.ok:
        return ConflictReport(
            verdict="conflicting",
            base=std.name,
            features=tuple(p.name for p in patches),
            evidence=(
                "every patch applied, but the result does not refine the base machine; "
                + certificate.describe(),
            ),
            bounds=bounds,
        )
    return work


def conflict_matrix(
    std: Std,
    patches: tuple[FeaturePatch, ...],
    env: Environment,
    bounds: Bounds = DEFAULT_BOUNDS,
) -> list[tuple[tuple[int, int], ConflictReport]]:
    """Pairwise conflict reports for every unordered pair of patches."""
    out = []
    for i in range(len(patches)):
        for j in range(i + 1, len(patches)):
            out.append(((i, j), detect_conflict(std, patches[i], patches[j], env, bounds)))
    return out


def conflict_to_json(report: ConflictReport) -> dict:
    return {
        "format": "conflict/1",
        "verdict": report.verdict,
        "base": report.base,
        "features": list(report.features),
        "evidence": list(report.evidence),
        "bounds": bounds_to_json(report.bounds),
        "merged": report.merged.name if report.merged is not None else None,
    }
