#pragma once

#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <string>

#include <Eigen/Dense>

namespace isp {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Emits each distinct message once per process on stderr.
void warn_once(const std::string& msg);
// Number of distinct warnings emitted so far.
int warning_count();

using Engine = std::mt19937_64;
inline constexpr const char* kSamplerId = "mt19937_64(seed_seq{seed,stream}) + std::normal_distribution";

// Independent stream `stream` derived from `seed`.
Engine make_engine(std::uint64_t seed, std::uint64_t stream = 0);

// M x N matrix of i.i.d. standard normals, filled row by row.
RowMatrix gaussian_matrix(int M, int N, std::uint64_t seed, std::uint64_t stream = 0);

// Collects the first exception thrown inside an OpenMP region.
class ExceptionSlot {
 public:
  template <class Fn>
  void run(Fn&& fn) {
    try {
      fn();
    } catch (...) {
      std::lock_guard<std::mutex> lk(mu_);
      if (!ptr_) ptr_ = std::current_exception();
    }
  }
  void rethrow() {
    if (ptr_) std::rethrow_exception(ptr_);
  }

 private:
  std::mutex mu_;
  std::exception_ptr ptr_;
};

// Round-trip formatting (17 significant digits).
std::string fmt17(double v);

}  // namespace isp
