#include "trilab/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace trilab {

int apply_thread_cap_from_env() {
    const char* raw = std::getenv("TRICHOTOMY_LAB_THREADS");
    if (raw != nullptr) {
        try {
            int requested = std::stoi(raw);
            if (requested >= 1) omp_set_num_threads(requested);
        } catch (const std::exception&) {
            // unparsable value: leave the runtime default in place
        }
    }
    return omp_get_max_threads();
}

int current_max_threads() { return omp_get_max_threads(); }

void set_thread_count(int n) {
    if (n >= 1) omp_set_num_threads(n);
}

}  // namespace trilab
