// Times the data-parallel kernels in serial and OpenMP modes and checks that
// both modes agree bit-for-bit on every reduction.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "bregalt/generator.hpp"
#include "bregalt/parallel.hpp"
#include "bregalt/sets.hpp"

namespace {

using bregalt::par::Exec;

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

struct Row {
  std::string name;
  double serial_ms = 0;
  double openmp_ms = 0;
  bool identical = false;
};

}  // namespace

int main() {
  using namespace bregalt;
  const std::ptrdiff_t n = 1 << 21;
  const int reps = 5;
  std::vector<Row> rows;

  // Synthetic scalar field with a unique interior minimum plus exact ties,
  // exercising the lowest-index tie-break.
  auto field = [&](std::ptrdiff_t i) {
    const double x = static_cast<double>(i % 4096) / 4096.0;
    const double y = static_cast<double>(i / 4096) / 4096.0;
    return std::cos(12.0 * x) * (1.5 + std::sin(9.0 * y));
  };

  {
    Row row{"argmin", 0, 0, false};
    par::ArgMin a, b;
    row.serial_ms = time_ms([&] { a = par::argmin(n, Exec::serial, field); }, reps);
    row.openmp_ms = time_ms([&] { b = par::argmin(n, Exec::openmp, field); }, reps);
    row.identical = a.index == b.index && a.value == b.value;
    rows.push_back(row);
  }
  {
    Row row{"reduce_min", 0, 0, false};
    double a = 0, b = 0;
    row.serial_ms = time_ms([&] { a = par::reduce_min(n, Exec::serial, field); }, reps);
    row.openmp_ms = time_ms([&] { b = par::reduce_min(n, Exec::openmp, field); }, reps);
    row.identical = a == b;
    rows.push_back(row);
  }
  {
    Row row{"reduce_minmax", 0, 0, false};
    par::MinMax a, b;
    row.serial_ms = time_ms([&] { a = par::reduce_minmax(n, Exec::serial, field); }, reps);
    row.openmp_ms = time_ms([&] { b = par::reduce_minmax(n, Exec::openmp, field); }, reps);
    row.identical = a.min == b.min && a.max == b.max;
    rows.push_back(row);
  }
  {
    // End-to-end kernel consumer: a global grid-scan projection onto a
    // one-parameter curve, run with each executor.
    const Generator g = make_generator("euclidean", 2);
    SetSpec curve = make_parametric(
        make_parametric_map("parabola", {{"coeff", 1.0}, {"lo", -2.0}, {"hi", 2.0}}), 1 << 15);
    Vector pt(2);
    pt << 0.3, 1.7;
    Row row{"left_project grid", 0, 0, false};
    ProjectionResult a, b;
    SolverOptions opt;
    opt.exec = Exec::serial;
    row.serial_ms = time_ms([&] { a = left_project(g, curve, pt, std::nullopt, opt); }, reps);
    opt.exec = Exec::openmp;
    row.openmp_ms = time_ms([&] { b = left_project(g, curve, pt, std::nullopt, opt); }, reps);
    row.identical = a.point == b.point && a.value == b.value;
    rows.push_back(row);
  }

  std::printf("threads: %d\n", par::thread_count());
  std::printf("%-18s %12s %12s %10s %10s\n", "kernel", "serial ms", "openmp ms", "speedup",
              "identical");
  bool all_ok = true;
  for (const Row& row : rows) {
    std::printf("%-18s %12.3f %12.3f %9.2fx %10s\n", row.name.c_str(), row.serial_ms,
                row.openmp_ms, row.serial_ms / row.openmp_ms, row.identical ? "yes" : "NO");
    all_ok = all_ok && row.identical;
  }
  return all_ok ? 0 : 1;
}
