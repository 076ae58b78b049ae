"""Skill-aware haptic nudging toolkit for body-machine-interface target capture.

Modules:
    bomi       hand-posture to cursor mapping, calibration, task geometry
    metrics    trial-end detection, reaching error, smoothness, variance accounting
    iohmm      input-output hidden Markov learner models and training
    policy     nudge planning: POMDP construction, soft value iteration, QMDP, beliefs
    simulator  closed-loop episodes against simulated learners, policy comparison
    persist    model artifacts and trial logs on disk
    reports    delimited summaries and figures from trial logs
    service    live WebSocket session protocol
    cli        command-line entry points
"""

__version__ = "0.1.0"
