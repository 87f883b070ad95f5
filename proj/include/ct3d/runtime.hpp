#pragma once

namespace ct3d {

// Keeps freed tensor storage inside the process heap. Tape tensors of a few
// hundred KB otherwise cross glibc's mmap threshold and every forward pass
// pays for fresh page faults. No-op on other C libraries.
void tune_allocator();

}  // namespace ct3d
