"""Grover key/value search over n-gram hash tables, with a state-vector simulator."""

from .errors import (
    ArgumentError,
    DegenerateStateError,
    FormatError,
    QgramError,
    ResourceError,
    StateError,
)
from .grover import (
    GroverPlan,
    SearchTrace,
    analytic_probability,
    diffuse,
    grover_search,
    iteration_count,
    lookup_estimate,
    tag_value,
)
from .ngrams import (
    BucketCounter,
    NgramConfig,
    NgramRecord,
    build_table,
    count_corpus,
    hash_ngram,
    roll_hash,
    scan_stream,
    select_top_k,
)
from .state import QubitRange, StateVector, create_state
from .table import (
    LookupTable,
    classical_find_value,
    deserialize,
    memory_estimate,
    read_table,
    serialize,
    write_table,
)

__version__ = "0.1.0"
