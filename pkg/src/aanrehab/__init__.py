"""Shape-adaptive assist-as-needed therapy simulator."""

from .core import (ForceEvent, ProbTrajectory, SessionConfig, TimedTrajectory,
                   ViaPoint, resample)
from .gmmgmr import GmmModel, fit_gmm, gmr_condition
from .kmp import KmpModel, deform_reference, kmp_fit, kmp_predict
from .metrics import corrective_force_metric, sparc
from .policy import (ScriptedTherapist, Task, TherapySession, run_iteration,
                     run_session)
from .simdyn import (ElasticBand, EpisodeLog, PatientModel, RobotImpedance,
                     impedance_force, patient_force, replay_with_forces,
                     run_episode)
from .skill import PlsModel, fit_skill, pls_fit, pls_predict, reproduce_skill
from .viapoint import boundary_via_points, derive_via_points, detect_segments

__version__ = "0.1.0"

__all__ = [
    "ForceEvent", "ProbTrajectory", "SessionConfig", "TimedTrajectory",
    "ViaPoint", "resample", "GmmModel", "fit_gmm", "gmr_condition",
    "KmpModel", "deform_reference", "kmp_fit", "kmp_predict",
    "corrective_force_metric", "sparc", "ScriptedTherapist", "Task",
    "TherapySession", "run_iteration", "run_session", "ElasticBand",
    "EpisodeLog", "PatientModel", "RobotImpedance", "impedance_force",
    "patient_force", "replay_with_forces", "run_episode", "PlsModel",
    "fit_skill", "pls_fit", "pls_predict", "reproduce_skill",
    "boundary_via_points", "derive_via_points", "detect_segments",
    "__version__",
]
