"""stdrefine: state transition diagram specifications with bounded stream
semantics, syntactic refinement rules, and feature conflict detection."""

from .model import (
    BoolSort,
    Configuration,
    EnumSort,
    Environment,
    EnvSymDecl,
    IntSort,
    ListSort,
    Msg,
    MsgCtor,
    Signature,
    Std,
    Transition,
    Undefined,
    desugar,
    make_config,
    make_environment,
    validate_std,
)
from .interp import (
    Bounds,
    CHAOS,
    DEFAULT_BOUNDS,
    Entry,
    ResourceLimit,
    StepResult,
    TraceSet,
    Verdict,
    Witness,
    check_monotone,
    simulate,
    simulate_prefixes,
    traces,
)
from .refine import (
    AddStates,
    AddTransitions,
    RemoveInitialStates,
    RemoveStates,
    RemoveTransitions,
    RuleError,
    SignatureMismatch,
    SplitState,
    apply_rule,
    check_refinement,
    trace_equivalence,
    trace_inclusion,
)
from .callproc import (
    BLOCKING_TABLES,
    FORWARDING_TABLES,
    STEP_FEATURES,
    base_std,
    block_predicates,
    build_step,
    check_forwarding_acyclic,
    conflict_patches,
    corpus_path,
    corpus_text,
    default_env,
    duo_std,
    feature_patch,
    forwarding_cycle,
    quiet_env,
    stack_std,
    tel_std,
    validate_call_env,
)
from .features import (
    ConflictReport,
    FeatureApplyError,
    FeaturePatch,
    apply_feature,
    conflict_matrix,
    detect_conflict,
    integrate_chain,
)
from .textlang import (
    ParseError,
    ParseFailure,
    export_dot,
    parse_env,
    parse_feature,
    parse_messages,
    parse_std,
    print_env,
    print_feature,
    print_std,
    std_from_json,
    std_to_json,
)

__version__ = "0.1.0"

__all__ = [
    "BLOCKING_TABLES",
    "FORWARDING_TABLES",
    "STEP_FEATURES",
    "base_std",
    "block_predicates",
    "build_step",
    "check_forwarding_acyclic",
    "conflict_patches",
    "corpus_path",
    "corpus_text",
    "default_env",
    "duo_std",
    "feature_patch",
    "forwarding_cycle",
    "quiet_env",
    "stack_std",
    "tel_std",
    "validate_call_env",
    "AddStates",
    "AddTransitions",
    "BoolSort",
    "Bounds",
    "CHAOS",
    "Configuration",
    "ConflictReport",
    "DEFAULT_BOUNDS",
    "Entry",
    "EnumSort",
    "Environment",
    "EnvSymDecl",
    "FeatureApplyError",
    "FeaturePatch",
    "IntSort",
    "ListSort",
    "Msg",
    "MsgCtor",
    "ParseError",
    "ParseFailure",
    "RemoveInitialStates",
    "RemoveStates",
    "RemoveTransitions",
    "ResourceLimit",
    "RuleError",
    "Signature",
    "SignatureMismatch",
    "SplitState",
    "Std",
    "StepResult",
    "TraceSet",
    "Transition",
    "Undefined",
    "Verdict",
    "Witness",
    "apply_feature",
    "apply_rule",
    "check_monotone",
    "check_refinement",
    "conflict_matrix",
    "desugar",
    "detect_conflict",
    "export_dot",
    "integrate_chain",
    "make_config",
    "make_environment",
    "parse_env",
    "parse_feature",
    "parse_messages",
    "parse_std",
    "print_env",
    "print_feature",
    "print_std",
    "simulate",
    "simulate_prefixes",
    "std_from_json",
    "std_to_json",
    "trace_equivalence",
    "trace_inclusion",
    "traces",
    "validate_std",
    "__version__",
]
