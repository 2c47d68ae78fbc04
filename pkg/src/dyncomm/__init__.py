"""Dynamic community detection via ensembles of MCMC clusterings."""

from .core import (DataError, DynamicGraph, Partition, SegmentGraph,
                   TimeSegmentation, TimestampedEdge, blocks_of, slice_graph)
from .generator import (BlockModelSchedule, EventSpec, ModelError, SigmaRamp,
                        build_split_merge_model, build_static_model,
                        calibrate_rates, inject, sample_segment,
                        transition_segments)
from .mcmc import (ClustererConfig, ClusteringError, ObjectiveValue, cluster,
                   objective, propose_and_accept)
from .metrics import (MetricSeries, PairConfusion, aggregate, pair_confusion,
                      precision, recall)
from .resolver import (BlockScore, PartitionCloud, ResolutionError,
                       WorkCounter, median_block_count, resolution_cost_estimate,
                       resolve, score_blocks, similarity, smoothing_context)
from .flow import (DotScale, FlowEdge, FlowGraph, FlowNode, build_flow,
                   emit_dot, emit_json, parse_flow_json)
from .harness import (ExperimentConfig, derive_seed, ingest_snap,
                      run_experiment, run_segment_pipeline,
                      weekly_segmentation)

__version__ = "0.1.0"
