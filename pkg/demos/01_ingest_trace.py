"""
Reading a cluster trace
=======================

Trace rows carry their resource requests and usage as quoted object
literals, and per-job CPU histograms as array literals. This script writes
a small synthetic trace, parses it back and shows what preprocessing turns
one row into.
"""

import tempfile
from pathlib import Path

from utilcast.trace_ingest import (
    PreprocessConfig,
    generate_synthetic_trace,
    parse_resource_request,
    preprocess_file,
    summarize_distribution,
    write_trace_csv,
)

# the nested cells are plain text until parsed
print(parse_resource_request("{'cpus': 0.5, 'memory': 0.25}"))
print(summarize_distribution([0.1, 0.4, 0.2, 0.9]))

workdir = Path(tempfile.mkdtemp())
trace = workdir / "trace.csv"
write_trace_csv(generate_synthetic_trace(500, seed=1), trace)

# most jobs ask for fewer than 5 CPUs, a few ask for many more
parsed, pre = preprocess_file(trace, PreprocessConfig(low_cardinality_threshold=32))
print(f"{len(parsed)} rows parsed, {parsed.skip_count} skipped")
print(f"{len(pre.rows[0])} numeric columns per job")
for name in sorted(pre.rows[0])[:10]:
    print(f"  {name:32s} {pre.rows[0][name]!r}")
print("frequency encoders:", sorted(pre.encoders))
