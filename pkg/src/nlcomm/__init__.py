"""Correlation-assisted one-way classical communication: tasks, bounds, protocols."""
from .correlations import (Correlation, all_pr_boxes, deterministic_local, i3322_extremal,
                           isotropic_mix, mix, pairwise_pr_candidate, phi_sets, pr_box,
                           validate, white_noise, wire_transform)
from .tasks import (Channel, Task, build_cs, build_i3322_task, build_prbox_task, build_table1,
                    channel_from_matrix, noiseless_channel, reduce_wire_reading)
from .wirecut import (AssistedProtocol, BellFunctional, bell_from_task, cut_wire, evaluate_bell,
                      i3322_functional, simulate_assisted)

__version__ = "0.1.0"
