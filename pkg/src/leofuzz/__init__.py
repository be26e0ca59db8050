"""Multi-target directed greybox fuzzing over simulated programs.

The package computes target sequences from dominator trees, scores seeds
by how much of each sequence they cover, schedules energy with an annealed
capability measure, and switches between exploration and exploitation
stages.  Programs are JSON graph models whose branches test input bytes,
so whole campaigns run in-process and replay exactly.
"""

__version__ = "0.1.0"
