from ..metrics import perturbation_norms
from .mnist import Dataset, IDXError, load_mnist_idx
from .pgm import dump_image_pgm, dump_perturbation_pgm, read_pgm, write_pgm

__all__ = ["perturbation_norms", "Dataset", "IDXError", "load_mnist_idx",
           "dump_image_pgm", "dump_perturbation_pgm", "read_pgm", "write_pgm"]
