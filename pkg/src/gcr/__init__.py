"""Grassmann class representation: subspace classifier heads trained with
Riemannian SGD on a product of Grassmann manifolds."""
from .analysis import (AngleReport, FeatureBank, angle_report, class_separation_r2,
                       intra_class_variability, principal_angles)
from .errors import (ConvergenceError, CorruptContainer, DegenerateFeature, DimensionError,
                     EmptyClass, GcrError, InvalidSpec, RankDeficient, TangencyError,
                     VersionMismatch)
from .grassmann import (ProductGrassmannParam, RsgdState, geodesic_retract, orthonormality_error,
                        qr_retract, random_subspace, riemannian_grad, rsgd_step,
                        transport_momentum)
from .heads import CosineHead, GcrHead, LinearHead, normalize_feature
from .linalg import qf, thin_svd
from .train import Dataset, MlpBackbone, TrainConfig, evaluate, train

__version__ = "0.1.0"
