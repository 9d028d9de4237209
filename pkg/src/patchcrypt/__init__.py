"""Block-wise perceptual image encryption with matching ViT patch-embedding
adaptation, plus the supporting file formats and segmentation metrics.

A single 256-bit key deterministically drives one permutation of the
3*P*P values inside every P x P block. Applying it to images (encryption)
and to the columns of a patch-embedding weight matrix (adaptation) makes
the embedding of an encrypted image equal the embedding of the plain one,
which is what lets downstream training and inference run on protected
images without an accuracy penalty at this layer.
"""

from .blockcipher import (
    BlockGeometry,
    GeometryError,
    decrypt_image,
    encrypt_image,
    flatten_block,
    unflatten_block,
)
from .embedding import (
    EquivalenceReport,
    PatchEmbedding,
    TokenGrid,
    adapt_embedding,
    embed_forward,
    from_conv_layout,
    to_conv_layout,
    verify_equivariance,
)
from .imagecodec import (
    CodecError,
    Image,
    LabelMap,
    read_pgm_labels,
    read_ppm,
    write_pgm_labels,
    write_ppm,
)
from .keyschedule import (
    KeyFormatError,
    Permutation,
    SecretKey,
    derive_seed,
    generate_permutation,
    invert,
    keygen,
    parse_key,
    prng_next,
    read_key_file,
    write_key_file,
)
from .segmetrics import (
    ConfusionMatrix,
    MetricsError,
    MetricsReport,
    accumulate,
    compute,
    merge,
)
from .tensorarchive import (
    ArchiveError,
    TensorArchive,
    TensorRecord,
    adapt_archive,
    load_patch_embedding,
    read_archive,
    record_from_array,
    write_archive,
)

__version__ = "0.1.0"
