"""Coverage-constrained inspection path planning for UAS around triangle meshes."""

from .bridge import Bridge, BridgeParams, generate_bridge
from .ga import (EvaluatedIndividual, GAConfig, GenerationStats, crossover, evolve, fitness,
                 mutate_add, mutate_change, mutate_delete, tournament_select)
from .mesh import (Face, MeshRole, RegionSpec, TriMesh, apply_weights, face_metrics, load_mesh,
                   segment_occluded)
from .paths import (CoverageModel, InspectionPath, SpanTemplate, path_coverage, path_length,
                    random_init, rule_based_init)
from .poses import CameraPose, PoseParams, candidate_poses, greedy_poses, pose_visible_set
from .viewpoints import GridSpec, NoFlyZone, ViewpointGraph, build_graph
from .visibility import (VisibilityMatrix, VisibilityParams, compute_visibility, face_visible,
                         load_matrix, save_matrix)

__version__ = "0.1.0"
