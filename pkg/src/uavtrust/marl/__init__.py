"""Value networks, replay, DQN/DDQN learners and the routing environment wrapper."""
