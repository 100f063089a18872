"""limitgen: online learner-vs-adversary simulation of language generation
in the limit under contaminated enumerations, with exact symbolic oracles."""

__version__ = "0.1.0"
