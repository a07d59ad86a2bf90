"""Trusted routing for mobile multi-hop networks with Byzantine relays.

Subpackages and modules:

* :mod:`uavtrust.geometry` -- positions, mobility, neighbor and link selection
* :mod:`uavtrust.channel` -- path loss, Shannon rate, energy accounting
* :mod:`uavtrust.traffic` -- FIFO queues, delay bookkeeping, flow validation
* :mod:`uavtrust.adversary` -- importance-ranked attack targets and misbehavior
* :mod:`uavtrust.trust` -- behavior counters and adaptive trust weights
* :mod:`uavtrust.consensus` -- trust-ranked PBFT ledger with membership rotation
* :mod:`uavtrust.marl` -- value networks, replay, DQN/DDQN learners, routing env
* :mod:`uavtrust.harness` -- config, experiments, oracle, metrics, CLI
"""

__version__ = "0.1.0"
