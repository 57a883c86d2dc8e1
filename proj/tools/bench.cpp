// Compares the serial reference kernels against the OpenMP ones on a
// generated fixture and checks that the results agree bit-for-bit.

#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <string>

#include "trilab/fixtures.hpp"
#include "trilab/parallel.hpp"
#include "trilab/spectral.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
    using namespace trilab;

    int window = argc > 1 ? std::atoi(argv[1]) : 100;
    int block_dim = argc > 2 ? std::atoi(argv[2]) : 2;
    int reps = argc > 3 ? std::atoi(argv[3]) : 5;
    int threads = apply_thread_cap_from_env();

    GeneratorSpec spec;
    spec.blocks = {{BlockRole::Stable, block_dim},
                   {BlockRole::Unstable, block_dim},
                   {BlockRole::Central, block_dim}};
    spec.horizon = window;
    spec.rotation_seed = 42;
    FixtureTriple fx = gen_block_diagonal(spec);

    TransitionCache tc(fx.sys);
    tc.prepopulate(window);
    Envelope env = make_decay_envelope(fx.params.h, fx.params.a, fx.params.mu, fx.params.eps);

    std::cout << "window=" << window << " dim=" << fx.sys.dim() << " reps=" << reps
              << " threads=" << threads << "\n";

    auto bench = [&](const char* name, auto&& fn) {
        fn();  // warm the cache before timing
        auto t0 = Clock::now();
        for (int r = 0; r < reps; ++r) fn();
        std::cout << std::left << std::setw(28) << name << std::fixed << std::setprecision(2)
                  << ms_since(t0) / reps << " ms/rep\n";
    };

    KminEntry serial, parallel;
    bench("kmin sweep (serial)", [&] {
        serial = kmin_forward(tc, fx.fam.stable, env, window, ExecPolicy::Serial);
    });
    bench("kmin sweep (openmp)", [&] {
        parallel = kmin_forward(tc, fx.fam.stable, env, window, ExecPolicy::Parallel);
    });

    PropagatorReport prop_serial, prop_parallel;
    bench("propagator check (serial)", [&] {
        prop_serial = tc.check_propagator(window, 1e-10, ExecPolicy::Serial);
    });
    bench("propagator check (openmp)", [&] {
        prop_parallel = tc.check_propagator(window, 1e-10, ExecPolicy::Parallel);
    });

    bench("sampling oracle (serial)", [&] {
        sampled_kmin_lower_bound(tc, fx.fam.stable, env, BoundDirection::ForwardUpper, window,
                                 200, 7, ExecPolicy::Serial);
    });
    bench("sampling oracle (openmp)", [&] {
        sampled_kmin_lower_bound(tc, fx.fam.stable, env, BoundDirection::ForwardUpper, window,
                                 200, 7, ExecPolicy::Parallel);
    });

    bool same = serial.log_kmin == parallel.log_kmin && serial.witness_m == parallel.witness_m &&
                serial.witness_n == parallel.witness_n &&
                prop_serial.worst_relative_error == prop_parallel.worst_relative_error;
    std::cout << (same ? "serial and parallel results identical\n"
                       : "MISMATCH between serial and parallel results\n");
    return same ? 0 : 1;
}
