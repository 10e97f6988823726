from .energy import EnergyModel, Labeling
from .field import CoarseField, Heatmap, VoterField, VoterFieldFile
from .grid import LogPolarGrid, VoteKernel
from .pose import Annotation, Keypoint, KeypointKind, PersonHint, PoseEstimate, Skeleton, SkeletonEdge
from .table import JointTable, PriorTable
