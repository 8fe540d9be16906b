#pragma once

namespace cfx {

/// Worker count for OpenMP regions: `requested` if > 0, else the CFX_THREADS
/// environment variable, else the OpenMP default.
int resolve_threads(int requested = 0);

}  // namespace cfx
