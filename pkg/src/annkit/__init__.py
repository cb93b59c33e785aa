"""annkit: approximate nearest-neighbor search over dense and sparse vectors.

One navigable-graph index (`HnswIndex`) covers every supported combination of
vector kind (dense, sparse), representation (exact float32, product-quantized
codes), and measure (squared L2, inner product). The combinations compose
instead of being separate code paths: datasets own storage, quantizers own
representation, evaluators own scoring, and the graph only ever sees scores.
"""

from .bench import (
    BenchmarkRecord,
    CSV_HEADER,
    bench_sweep,
    compute_ground_truth,
    read_benchmark_csv,
    recall_at_k,
    render_benchmark_figure,
    write_benchmark_csv,
)
from .dataset import DenseDataset, SparseDataset
from .errors import FormatError, UnsupportedCombinationError
from .hnsw import HnswConfig, HnswIndex, assign_level, load_index
from .io import (
    CsrMatrix,
    read_fvecs,
    read_ivecs,
    read_sparse_csr,
    write_fvecs,
    write_ivecs,
    write_sparse_csr,
)
from .quantizer import (
    IdentityQuantizer,
    PQCodebook,
    ProductQuantizer,
    adc_score,
    build_distance_table,
    decode,
    encode,
    encode_batch,
    train_pq,
)
from .query_eval import QueryEvaluator, SearchResults, TopK, make_evaluator
from .vectors import (
    Measure,
    SparseVector,
    as_dense,
    better,
    dot_dense,
    dot_sparse,
    score,
    squared_l2,
)

__version__ = "0.1.0"

__all__ = [
    "BenchmarkRecord",
    "CSV_HEADER",
    "CsrMatrix",
    "DenseDataset",
    "FormatError",
    "HnswConfig",
    "HnswIndex",
    "IdentityQuantizer",
    "Measure",
    "PQCodebook",
    "ProductQuantizer",
    "QueryEvaluator",
    "SearchResults",
    "SparseDataset",
    "SparseVector",
    "TopK",
    "UnsupportedCombinationError",
    "adc_score",
    "as_dense",
    "assign_level",
    "bench_sweep",
    "better",
    "build_distance_table",
    "compute_ground_truth",
    "decode",
    "dot_dense",
    "dot_sparse",
    "encode",
    "encode_batch",
    "load_index",
    "make_evaluator",
    "read_benchmark_csv",
    "read_fvecs",
    "read_ivecs",
    "read_sparse_csr",
    "recall_at_k",
    "render_benchmark_figure",
    "score",
    "squared_l2",
    "train_pq",
    "write_benchmark_csv",
    "write_fvecs",
    "write_ivecs",
    "write_sparse_csr",
    "__version__",
]
