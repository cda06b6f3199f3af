"""Diffusion adaptation over networks with two underlying models.

Agents run adapt-then-combine LMS on streaming data generated by one of two
unknown parameter vectors, classify which model each neighbor observes,
reach agreement on a common target through a quorum response, and converge
to it without bias.  Markov-chain and mobility (fish schooling) analyses
are included.
"""

__version__ = "0.1.0"
