"""Monte Carlo simulation of selfish mining under Ethereum-style uncle rewards."""

from unclesim.chain import (Block, BlockClass, BlockTree, ChainError, ChainRule, Miner,
                            RewardLedger, append_block, classify_blocks, compute_rewards,
                            dump_tree, eligible_uncles, main_chain, uncle_reward)
from unclesim.consensus import chain_weight, run_weighted_scenario, scripted_fork
from unclesim.engine import Mode, SimParams, WalkStats, run_walk, simulate
from unclesim.experiment import (AggregateReport, BatchConfig, eyal_sirer_revenue, export_csv,
                                 find_break_even, run_batch, run_batch_adaptive, sweep)
from unclesim.metrics import MetricsReport, compute_metrics
from unclesim.strategy import (EventKind, Phase, SelfishState, UncleMode, UncleStrategy,
                               honest_step, sample_event, select_uncles, selfish_step)

__all__ = [
    "AggregateReport", "BatchConfig", "Block", "BlockClass", "BlockTree", "ChainError",
    "ChainRule", "EventKind", "MetricsReport", "Miner", "Mode", "Phase", "RewardLedger",
    "SelfishState", "SimParams", "UncleMode", "UncleStrategy", "WalkStats", "append_block",
    "chain_weight", "classify_blocks", "compute_metrics", "compute_rewards", "dump_tree",
    "eligible_uncles", "export_csv", "eyal_sirer_revenue", "find_break_even", "honest_step",
    "main_chain", "run_batch", "run_batch_adaptive", "run_walk", "run_weighted_scenario",
    "sample_event", "scripted_fork", "select_uncles", "selfish_step", "simulate", "sweep",
    "uncle_reward",
]
