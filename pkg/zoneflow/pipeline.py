from __future__ import annotations

import logging
from dataclasses import replace
from typing import Sequence, Tuple

from langchain_core.runnables import RunnableLambda

from .config import RunConfig
from .fidelity import FidelityReport, evaluate
from .scheduler import schedule
from .stages import (
    anneal_stage,
    emit_stage,
    evaluate_stage,
    ingest_stage,
    place_stage,
    route_stage,
    schedule_stage,
    validate_stage,
    write_stage,
)
from .state import CompileState
from .zair import ZairProgram

logger = logging.getLogger(__name__)

VARIANT_STAGES = (place_stage, route_stage, schedule_stage, emit_stage, validate_stage, evaluate_stage)


def _compose(stages: Sequence, cfg: RunConfig):
    chain = None
    for stage_fn in stages:
        step = RunnableLambda(lambda state, fn=stage_fn: fn(state, cfg))
        chain = step if chain is None else chain | step
    return chain


def build_variant_chain(config: RunConfig):
    """place -> route -> schedule -> emit -> validate -> evaluate for one compiler setting."""
    return _compose(VARIANT_STAGES, config)


def variant_score(candidate: CompileState) -> float:
    """Fidelity of a compiled variant on the AOD count declared by its architecture file."""
    if len(candidate.arch.aods) == candidate.declared_aods:
        return candidate.report.fidelity
    # An --aods override must not change which variant wins.
    timeline = schedule(candidate.instructions, candidate.deps, candidate.declared_aods)
    return evaluate(timeline, candidate.counters, candidate.hw).fidelity


def select_variant(state: CompileState, config: RunConfig) -> CompileState:
    """Compile every reuse / dynamic-placement setting the config allows and keep the best program.

    Disabling a feature only removes candidates, so a run with a feature enabled never scores
    below the same run with it disabled. Ties go to the more capable setting.
    """
    best, best_score = None, float("-inf")
    scores = []
    for compiler in config.compiler.variants():
        candidate = build_variant_chain(replace(config, compiler=compiler)).invoke(replace(state, stats=dict(state.stats)))
        score = variant_score(candidate)
        label = {"reuse": compiler.reuse_enabled, "dynamic_placement": compiler.dynamic_placement_enabled}
        scores.append({**label, "fidelity": score})
        logger.info("[PLACE] variant reuse=%s dynamic=%s f=%.6f", compiler.reuse_enabled, compiler.dynamic_placement_enabled, score)
        if score > best_score:
            best, best_score = candidate, score
            best.stats["variant"] = label
    best.stats["variants"] = scores
    logger.info("[PLACE] committed variant %s", best.stats["variant"])
    return best


def build_pipeline_chain(config: RunConfig):
    cfg = config.resolve()
    chain = RunnableLambda(lambda _: CompileState())
    chain = chain | _compose((ingest_stage, anneal_stage, select_variant, write_stage), cfg)
    return chain


def run_compile(config: RunConfig) -> CompileState:
    chain = build_pipeline_chain(config)
    # Stages raise ZoneflowError subclasses; the caller maps them to exit codes.
    return chain.invoke({})


def compile_circuit(config: RunConfig) -> Tuple[ZairProgram, FidelityReport]:
    state = run_compile(config)
    return state.program, state.report
