"""PPO training of the human (and optional exoskeleton) walking policies."""
