"""Bounded dynamic checkers for the security and refinement obligations."""

from .hyper import check_sys_secure, sys_problem
from .modes import check_global_compatibility, check_local_compliance, global_problem
from .refinement import (abs_steps, check_decomposed_side_conditions, check_havoc_closure,
                         check_no_high_branching, check_refinement)
from .report import CheckReport, merge, violated
from .system import (GlobalConf, ScheduleError, all_schedules, default_domains, enumerate_mems,
                     low_eq_pairs, parse_schedule, random_schedules, risc_system,
                     run_schedule, sample_mems, step_thread, trace_schedule, while_system)

__all__ = [
    "CheckReport", "GlobalConf", "ScheduleError", "abs_steps", "all_schedules",
    "check_decomposed_side_conditions",
    "check_global_compatibility", "check_havoc_closure", "check_local_compliance",
    "check_no_high_branching", "check_refinement", "check_sys_secure", "default_domains",
    "enumerate_mems", "global_problem", "low_eq_pairs", "merge", "parse_schedule",
    "random_schedules", "risc_system", "run_schedule", "sample_mems", "step_thread",
    "sys_problem", "trace_schedule", "violated", "while_system",
]
