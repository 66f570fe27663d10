#pragma once

namespace qss {

// Every data-parallel kernel takes one of these. `serial` runs the same loop
// body in index order on the calling thread and is the reference the OpenMP
// path is tested against; kernels never reduce across threads, so both paths
// produce bitwise-identical output.
enum class Execution { serial, parallel };

}  // namespace qss
