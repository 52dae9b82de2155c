// Times the three marginalization kernels on one fitted joint conditional
// mean: serial reference, OpenMP reference, and the factorized grid
// evaluation. Also cross-checks that all three agree.
//
//   bench_marginalize [n_fit] [n_pred] [jobs]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>

#include "ifproj/mc.hpp"
#include "ifproj/project.hpp"

using namespace ifproj;

namespace {

int parse_count(const char* text, long min_value, const char* what) {
  char* end = nullptr;
  const long value = std::strtol(text, &end, 10);
  if (end == text || *end != '\0' || value < min_value) {
    std::fprintf(stderr, "error: %s must be an integer >= %ld, got '%s'\n",
                 what, min_value, text);
    std::fprintf(stderr, "usage: bench_marginalize [n_fit] [n_pred] [jobs]\n");
    std::exit(2);
  }
  return static_cast<int>(value);
}

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct Timing {
  double seconds = 0.0;
  Eigen::VectorXd out;
};

template <typename F>
Timing timed(F&& f) {
  Timing t;
  const double t0 = now_seconds();
  t.out = f();
  t.seconds = now_seconds() - t0;
  return t;
}

}  // namespace

int main(int argc, char** argv) try {
  const int n_fit = argc > 1 ? parse_count(argv[1], 10, "n_fit") : 4000;
  const int n_pred = argc > 2 ? parse_count(argv[2], 10, "n_pred") : 4000;
  const int jobs = argc > 3 ? parse_count(argv[3], 1, "jobs") : 4;

  const McDraw fit_draw = mc_generate(McKind::example1, n_fit, 11);
  const McDraw pred_draw = mc_generate(McKind::example1, n_pred, 12);
  const Eigen::VectorXd phi = fit_draw.truth.lin_y + fit_draw.truth.u;
  const CiConstraint c = canonical_constraint(2, 3, {1}, 4);

  CondMeanConfig cfg = default_cond_mean_config(7);
  const JointCondMean jm = fit_joint_cond_mean(phi, fit_draw.data.x, c, cfg);

  std::printf("joint fit: n_fit=%d n_pred=%d constraint (x3 _||_ x4 | x2) factorizable=%s\n",
              n_fit, n_pred, can_factorize(jm) ? "yes" : "no");

  for (Keep keep : {Keep::ijs, Keep::is, Keep::js, Keep::s}) {
    const char* label = keep == Keep::ijs ? "ijs" : keep == Keep::is ? "is " :
                        keep == Keep::js  ? "js " : "s  ";
    const Timing serial = timed([&] { return marginalize_reference(jm, pred_draw.data.x, keep, 1); });
    const Timing omp = timed([&] { return marginalize_reference(jm, pred_draw.data.x, keep, jobs); });
    const Timing fact = timed([&] { return marginalize_cond_mean(jm, pred_draw.data.x, keep); });

    const double diff_omp = (omp.out - serial.out).cwiseAbs().maxCoeff();
    const double diff_fact = (fact.out - serial.out).cwiseAbs().maxCoeff();
    std::printf(
        "keep=%s serial %8.3fs | omp(%d) %8.3fs (x%5.2f) | factorized %8.4fs (x%7.1f) | "
        "omp drift %.1e fact drift %.1e\n",
        label, serial.seconds, jobs, omp.seconds,
        omp.seconds > 0 ? serial.seconds / omp.seconds : 0.0, fact.seconds,
        fact.seconds > 0 ? serial.seconds / fact.seconds : 0.0, diff_omp, diff_fact);

    if (diff_omp != 0.0) {
      std::printf("FAIL: OpenMP kernel is not bit-identical to the serial reference\n");
      return 1;
    }
    if (diff_fact > 1e-8) {
      std::printf("FAIL: factorized evaluation drifted from the reference\n");
      return 1;
    }
  }
  return 0;
} catch (const std::exception& e) {
  std::fprintf(stderr, "error: %s\n", e.what());
  return 1;
}
