from .workload import StagePlan, gen_request, synth_block_payload, warmup
from .runner import run_bench

__all__ = ["StagePlan", "gen_request", "synth_block_payload", "warmup", "run_bench"]
