"""Cross-layer path selection for two-path multipath transport.

Subpackages cover the full pipeline: trace I/O and synthesis (traceio),
attribute statistics (featstats), classification-dataset construction
(dataset), decision-tree / random-forest learning (treelearn), the runtime
path selector and baselines (selector), and a deterministic two-path
network simulator (netsim).
"""

__version__ = "0.1.0"
