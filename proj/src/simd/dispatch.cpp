#include <atomic>
#include <cstdlib>
#include <cstring>

#include "taap/simd.hpp"

namespace taap::simd {

namespace {

Isa initial_isa() {
    const bool avx2 = isa_supported(Isa::avx2);
    if (const char* env = std::getenv("TAAP_SIMD")) {
        if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
        if (std::strcmp(env, "avx2") == 0 && avx2) return Isa::avx2;
    }
    return avx2 ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() {
    static std::atomic<Isa> isa{initial_isa()};
    return isa;
}

}  // namespace

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool isa_supported(Isa isa) {
    if (isa == Isa::scalar) return true;
#if defined(TAAP_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) { current().store(isa_supported(isa) ? isa : Isa::scalar); }

TaapSum taap_phase_average(const TaapInput& in, Isa isa) {
#ifdef TAAP_HAVE_AVX2
    if (isa == Isa::avx2) return detail::taap_phase_average_avx2(in);
#endif
    (void)isa;
    return detail::taap_phase_average_scalar(in);
}

void ring_model(const RingPixels& px, const double* p, double* out, Isa isa) {
#ifdef TAAP_HAVE_AVX2
    if (isa == Isa::avx2) return detail::ring_model_avx2(px, p, out);
#endif
    (void)isa;
    detail::ring_model_scalar(px, p, out);
}

RingNormal ring_normal(const RingPixels& px, const double* p, bool with_jacobian, Isa isa) {
#ifdef TAAP_HAVE_AVX2
    if (isa == Isa::avx2) return detail::ring_normal_avx2(px, p, with_jacobian);
#endif
    (void)isa;
    return detail::ring_normal_scalar(px, p, with_jacobian);
}

}  // namespace taap::simd
