"""gpitomo: cone-beam geometry engine and ultra-sparse-view CT toolkit."""

from .geometry import (ConeBeamGeometry, GeometryError, ViewAngleSet,
                       detector_coords, make_geometry, make_view_angles,
                       pixel_to_uv, source_position, uv_to_pixel)
from .images import Projection2D, ProjectionSet, Volume3D
from .projector import (forward_project, siddon_line_integral, siddon_project,
                        splat_project)
from .backproject import GpiPair, backproject, make_gpi_pair
from .phantom import EllipsoidSpec, ellipsoid_phantom, random_anatomy_phantom
from .gtf import GtfError, read_gtf, write_gtf
from .dataset import (DatasetManifest, SampleRecord, ScaleRecord,
                      build_dataset, denormalize, export_learned,
                      load_manifest, normalize, resample_volume)
from .metrics import MetricsReport, evaluate, mae, nrmse, psnr, ssim3d
from .recon import (SartParams, SweepReport, sart_reconstruct,
                    total_variation, tv_denoise_step, view_sweep)

__version__ = "0.1.0"
