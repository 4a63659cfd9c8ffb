#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <vector>

namespace mll {

namespace detail {

// FFTW planning is not thread-safe; execution of distinct plans is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct PlanDeleter {
    void operator()(fftw_plan_s* p) const {
        if (p) {
            std::lock_guard lock(fftw_planner_mutex());
            fftw_destroy_plan(p);
        }
    }
};
using PlanHandle = std::unique_ptr<fftw_plan_s, PlanDeleter>;

template <class T>
struct FftwFree {
    void operator()(T* p) const { fftw_free(p); }
};
template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree<T>>;

template <class T>
FftwBuffer<T> fftw_alloc(std::size_t n) {
    auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * (n == 0 ? 1 : n)));
    for (std::size_t i = 0; i < n; ++i) p[i] = T{};
    return FftwBuffer<T>(p);
}

inline fftw_complex* as_fftw(std::complex<double>* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace detail

// Batched 2-D complex transforms on an (n0 x n1) grid, `howmany` fields stored contiguously.
// backward(): spectral -> physical, unnormalized; forward(): physical -> spectral, scaled by 1/(n0 n1).
class BatchedFft2D {
public:
    BatchedFft2D(int n0, int n1, int howmany) : n0_(n0), n1_(n1), howmany_(howmany) {
        const std::size_t total = std::size_t(n0) * n1 * howmany;
        spec_ = detail::fftw_alloc<std::complex<double>>(total);
        phys_ = detail::fftw_alloc<std::complex<double>>(total);
        int dims[2] = {n0, n1};
        const int dist = n0 * n1;
        std::lock_guard lock(detail::fftw_planner_mutex());
        bwd_.reset(fftw_plan_many_dft(2, dims, howmany, detail::as_fftw(spec_.get()), nullptr, 1, dist,
                                      detail::as_fftw(phys_.get()), nullptr, 1, dist, FFTW_BACKWARD,
                                      FFTW_ESTIMATE));
        fwd_.reset(fftw_plan_many_dft(2, dims, howmany, detail::as_fftw(phys_.get()), nullptr, 1, dist,
                                      detail::as_fftw(spec_.get()), nullptr, 1, dist, FFTW_FORWARD,
                                      FFTW_ESTIMATE));
    }

    std::complex<double>* spec(int field) { return spec_.get() + std::size_t(field) * n0_ * n1_; }
    std::complex<double>* phys(int field) { return phys_.get() + std::size_t(field) * n0_ * n1_; }
    int n0() const { return n0_; }
    int n1() const { return n1_; }
    int howmany() const { return howmany_; }

    void backward() { fftw_execute(bwd_.get()); }
    void forward() {
        fftw_execute(fwd_.get());
        const double scale = 1.0 / (double(n0_) * n1_);
        const std::size_t total = std::size_t(n0_) * n1_ * howmany_;
        for (std::size_t i = 0; i < total; ++i) spec_[i] *= scale;
    }

private:
    int n0_, n1_, howmany_;
    detail::FftwBuffer<std::complex<double>> spec_, phys_;
    detail::PlanHandle bwd_, fwd_;
};

// Batched 2-D real transforms; the spectral side stores n0 x (n1/2 + 1) half-spectra.
class BatchedRealFft2D {
public:
    BatchedRealFft2D(int n0, int n1, int howmany)
        : n0_(n0), n1_(n1), half_(n1 / 2 + 1), howmany_(howmany) {
        spec_ = detail::fftw_alloc<std::complex<double>>(std::size_t(n0) * half_ * howmany);
        phys_ = detail::fftw_alloc<double>(std::size_t(n0) * n1 * howmany);
        int dims[2] = {n0, n1};
        std::lock_guard lock(detail::fftw_planner_mutex());
        bwd_.reset(fftw_plan_many_dft_c2r(2, dims, howmany, detail::as_fftw(spec_.get()), nullptr, 1,
                                          n0 * half_, phys_.get(), nullptr, 1, n0 * n1, FFTW_ESTIMATE));
        fwd_.reset(fftw_plan_many_dft_r2c(2, dims, howmany, phys_.get(), nullptr, 1, n0 * n1,
                                          detail::as_fftw(spec_.get()), nullptr, 1, n0 * half_,
                                          FFTW_ESTIMATE));
    }

    std::complex<double>* spec(int field) { return spec_.get() + std::size_t(field) * n0_ * half_; }
    double* phys(int field) { return phys_.get() + std::size_t(field) * n0_ * n1_; }
    int n0() const { return n0_; }
    int n1() const { return n1_; }
    int half() const { return half_; }

    // c2r overwrites its input; callers refill the spectrum before every call.
    void backward() { fftw_execute(bwd_.get()); }
    void forward() {
        fftw_execute(fwd_.get());
        const double scale = 1.0 / (double(n0_) * n1_);
        const std::size_t total = std::size_t(n0_) * half_ * howmany_;
        for (std::size_t i = 0; i < total; ++i) spec_[i] *= scale;
    }

private:
    int n0_, n1_, half_, howmany_;
    detail::FftwBuffer<std::complex<double>> spec_;
    detail::FftwBuffer<double> phys_;
    detail::PlanHandle bwd_, fwd_;
};

// 1-D complex transform of length n with the same normalization convention.
class Fft1D {
public:
    explicit Fft1D(int n) : n_(n) {
        spec_ = detail::fftw_alloc<std::complex<double>>(n);
        phys_ = detail::fftw_alloc<std::complex<double>>(n);
        std::lock_guard lock(detail::fftw_planner_mutex());
        bwd_.reset(fftw_plan_dft_1d(n, detail::as_fftw(spec_.get()), detail::as_fftw(phys_.get()),
                                    FFTW_BACKWARD, FFTW_ESTIMATE));
        fwd_.reset(fftw_plan_dft_1d(n, detail::as_fftw(phys_.get()), detail::as_fftw(spec_.get()),
                                    FFTW_FORWARD, FFTW_ESTIMATE));
    }

    int size() const { return n_; }

    std::vector<std::complex<double>> to_spectral(const std::vector<std::complex<double>>& f) {
        std::copy(f.begin(), f.end(), phys_.get());
        fftw_execute(fwd_.get());
        std::vector<std::complex<double>> out(spec_.get(), spec_.get() + n_);
        for (auto& z : out) z /= double(n_);
        return out;
    }

    std::vector<std::complex<double>> to_physical(const std::vector<std::complex<double>>& c) {
        std::copy(c.begin(), c.end(), spec_.get());
        fftw_execute(bwd_.get());
        return {phys_.get(), phys_.get() + n_};
    }

private:
    int n_;
    detail::FftwBuffer<std::complex<double>> spec_, phys_;
    detail::PlanHandle bwd_, fwd_;
};

// Smallest n >= m whose only prime factors are 2, 3, 5.
inline int fft_friendly_size(int m) {
    for (int n = std::max(m, 1);; ++n) {
        int r = n;
        for (int f : {2, 3, 5})
            while (r % f == 0) r /= f;
        if (r == 1) return n;
    }
}

}  // namespace mll
