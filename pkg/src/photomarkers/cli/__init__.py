"""Command-line orchestration: config, pipeline stages, report bundle."""

from .artifacts import Layout, atomic_write
from .commands import (
    ConvergenceFailure, DataError, MissingResource, PipelineError, cmd_aggregate, cmd_classify, cmd_extract,
    cmd_filters, cmd_fit, cmd_synth,
)
from .config import BENCHMARK, SCHEMA_VERSION, ConfigError, PipelineConfig
from .main import run
from .report import SECTIONS, build_bundle, cmd_report, render_text
