"""Differential oracle for operational correspondence between source
configurations and their process translations.

Completeness: every source step is mirrored by zero or more target steps
reaching (up to structural congruence) the translation of the successor.
Soundness is probed under the approximated lazy semantics only, and is
reported, never gated on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .names import fresh
from . import syntax as S
from . import apcp as A
from .typecheck import check_config_derivation
from .translate import trans_config
from .reduce import congruence_normalize, enumerate_steps, explore

STATE_CAP = 60_000


@dataclass
class CorrespondenceReport:
    rule: str
    path: str
    matched: bool
    target_steps: Optional[int]  # length of the found path, None if no path

    def render(self) -> str:
        verdict = f"matched in {self.target_steps}" if self.matched \
            else "NO PATH within bound"
        return f"{self.rule} @ {self.path}: {verdict}"


def _translate_state(config: S.Configuration, env, expected, z) -> A.Process:
    _, deriv = check_config_derivation(env, config, expected)
    return trans_config(deriv, z)


def _bfs_to_equiv(start: A.Process, target: A.Process, bound: int,
                  equiv_depth: int, mode: str = "standard") -> Optional[int]:
    """Length of a shortest reduction path from start to a process congruent
    to target, or None within the step bound / state cap."""
    if A.equiv_process(start, target, equiv_depth):
        return 0
    seen = {A.canon_process(start)}
    frontier = [start]
    for dist in range(1, bound + 1):
        nxt: list[A.Process] = []
        for p in frontier:
            for _, q in A.step_process(p, mode):
                k = A.canon_process(q)
                if k in seen:
                    continue
                seen.add(k)
                if A.equiv_process(q, target, equiv_depth):
                    return dist
                if len(seen) < STATE_CAP:
                    nxt.append(q)
        if not nxt:
            return None
        frontier = nxt
    return None


def completeness_check(config: S.Configuration, expected: S.FunType = S.UNIT,
                       env: Optional[dict] = None, bound: int = 40,
                       equiv_depth: int = 6, both_orders: bool = False,
                       loose_contexts: bool = False) -> list[CorrespondenceReport]:
    """For every step enabled from config, search the translation for a
    matching reduction sequence."""
    env = env or {}
    start = congruence_normalize(config, loose_contexts)
    z = fresh("z")
    source_p = _translate_state(start, env, expected, z)
    reports = []
    for step in enumerate_steps(start, both_orders, loose_contexts):
        succ = congruence_normalize(step.result, loose_contexts)
        target_p = _translate_state(succ, env, expected, z)
        dist = _bfs_to_equiv(source_p, target_p, bound, equiv_depth)
        reports.append(CorrespondenceReport(step.rule, step.path,
                                            dist is not None, dist))
    return reports


def trace_completeness(config: S.Configuration, expected: S.FunType = S.UNIT,
                       env: Optional[dict] = None, bound: int = 40,
                       equiv_depth: int = 6, fuel: int = 400,
                       loose_contexts: bool = False
                       ) -> list[CorrespondenceReport]:
    """completeness_check at every state along the deterministic trace."""
    from .reduce import run
    states: list[S.Configuration] = []
    run(config, "det", fuel=fuel, loose_contexts=loose_contexts,
        on_state=states.append)
    reports: list[CorrespondenceReport] = []
    for state in states:
        reports.extend(completeness_check(state, expected, env, bound,
                                          equiv_depth,
                                          loose_contexts=loose_contexts))
    return reports


@dataclass
class SoundnessReport:
    explored: int
    resolved: int
    unresolved: int
    corollary_ok: bool  # reductions in the target imply source progress
    note: str = "under the approximated lazy semantics"

    def render(self) -> str:
        return (f"soundness probe ({self.note}): {self.resolved}/{self.explored} "
                f"target states resolved to source states; "
                f"corollary spot-check {'ok' if self.corollary_ok else 'FAILED'}")


def soundness_probe(config: S.Configuration, expected: S.FunType = S.UNIT,
                    env: Optional[dict] = None, apcp_bound: int = 3,
                    cgv_bound: int = 80, resolve_bound: int = 30,
                    equiv_depth: int = 6,
                    loose_contexts: bool = False) -> SoundnessReport:
    """Explores lazy-mode reductions of the translation and tries to resolve
    each reached process to (the translation of) a source descendant."""
    env = env or {}
    start = congruence_normalize(config, loose_contexts)
    z = fresh("z")
    source_p = _translate_state(start, env, expected, z)

    # candidate source descendants with their reachability distance
    targets: list[tuple[int, A.Process]] = []
    seen_cfg: set[str] = set()
    from .pretty import canon_subject
    frontier = [(0, start)]
    while frontier and len(targets) < cgv_bound:
        dist, c = frontier.pop(0)
        k = canon_subject(c)
        if k in seen_cfg:
            continue
        seen_cfg.add(k)
        targets.append((dist, _translate_state(c, env, expected, z)))
        for step in enumerate_steps(c, loose_contexts=loose_contexts):
            frontier.append((dist + 1,
                             congruence_normalize(step.result, loose_contexts)))

    explored = 0
    resolved = 0
    corollary_ok = True
    seen = {A.canon_process(source_p)}
    level = [(0, source_p)]
    for _ in range(apcp_bound):
        nxt = []
        for qdist, q in level:
            for _, q2 in A.step_process(q, "lazy"):
                k = A.canon_process(q2)
                if k in seen:
                    continue
                seen.add(k)
                nxt.append((qdist + 1, q2))
        for qdist, q in nxt:
            explored += 1
            hit = None
            for tdist, tp in sorted(targets, key=lambda t: -min(t[0], 1)):
                d = _bfs_to_equiv(q, tp, resolve_bound, equiv_depth, mode="lazy")
                if d is not None:
                    hit = (tdist, d)
                    break
            if hit is not None:
                resolved += 1
                if qdist >= 1 and hit[0] < 1:
                    corollary_ok = False
        level = nxt
    return SoundnessReport(explored, resolved, explored - resolved, corollary_ok)
