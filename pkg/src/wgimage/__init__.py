"""wgimage: sampling-type imaging in a terminating rectangular waveguide.

The package synthesizes point-source scattering data for a voxelized
penetrable scatterer with a model-consistent volume-integral forward
solver, projects the data onto the propagating waveguide modes, and
evaluates an imaging function whose peaks locate the scatterer.
"""

from . import errors
from .config import RunConfig, load_config, parse_config, voxelize
from .green import GreenEvaluator
from .imaging import (
    DataMatrix,
    ImageLattice,
    ImageVolume,
    add_noise,
    assemble_data_matrix,
    image_volume,
    imaging_value,
    local_maxima_2d,
    probe_matrix,
    probe_mode_vector,
    psf_field,
    psf_vector,
    psf_volume,
    read_data_matrix,
    read_volume_csv,
    read_volume_vtk,
    write_data_matrix,
    write_volume_csv,
    write_volume_vtk,
)
from .modes import (
    EvanescentPolicy,
    ModeBasis,
    ModeIndex,
    WaveguideSpec,
    axial_wavenumber,
    enumerate_modes,
    eval_mode_field,
    mirror_point,
    transverse_normalizer,
)
from .operators import (
    ForwardModel,
    MeasurementGrid,
    PointSourceData,
    Scene,
    adjoint_field,
    contrast_current,
    factorization_residual,
    herglotz_field,
    read_point_source_data,
    synthesize_data,
    total_field,
    write_point_source_data,
)

__version__ = "0.1.0"

__all__ = [
    "DataMatrix",
    "EvanescentPolicy",
    "ForwardModel",
    "GreenEvaluator",
    "ImageLattice",
    "ImageVolume",
    "MeasurementGrid",
    "ModeBasis",
    "ModeIndex",
    "PointSourceData",
    "RunConfig",
    "Scene",
    "WaveguideSpec",
    "add_noise",
    "adjoint_field",
    "assemble_data_matrix",
    "axial_wavenumber",
    "contrast_current",
    "enumerate_modes",
    "errors",
    "eval_mode_field",
    "factorization_residual",
    "herglotz_field",
    "image_volume",
    "imaging_value",
    "load_config",
    "local_maxima_2d",
    "mirror_point",
    "parse_config",
    "probe_matrix",
    "probe_mode_vector",
    "psf_field",
    "psf_vector",
    "psf_volume",
    "read_data_matrix",
    "read_point_source_data",
    "read_volume_csv",
    "read_volume_vtk",
    "synthesize_data",
    "total_field",
    "transverse_normalizer",
    "voxelize",
    "write_data_matrix",
    "write_point_source_data",
    "write_volume_csv",
    "write_volume_vtk",
]
