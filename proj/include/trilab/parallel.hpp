#pragma once

namespace trilab {

// Every sweep kernel exists in two variants: the OpenMP one used in
// production and a serial reference the tests compare against. Both must
// produce bit-identical results (deterministic reduction).
enum class ExecPolicy { Serial, Parallel };

// Applies the TRICHOTOMY_LAB_THREADS cap, if set, to the OpenMP runtime.
// Returns the thread count now in effect.
int apply_thread_cap_from_env();

int current_max_threads();
void set_thread_count(int n);

}  // namespace trilab
