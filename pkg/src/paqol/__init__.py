"""Causal ML pipeline for activity/quality-of-life cohort studies.

Submodules:

* ``data`` - cohort schema, ingestion, standardization, activity/QoL bands
* ``graphs`` - DAG/CPDAG algebra, identification, edit scripts, DOT I/O
* ``discovery`` - Fisher-z CI testing, PC, GES, GIES
* ``boosting`` - gradient-boosted regression trees (compiled or numpy kernel)
* ``estimation`` - T-learner ATE and mediation plug-ins
* ``refutation`` - placebo / subset / random-cause / unobserved-cause probes
* ``scm`` - structural-model simulator, exact oracles, study template
* ``cli`` - the ``paqol`` command
"""

__version__ = "0.1.0"
