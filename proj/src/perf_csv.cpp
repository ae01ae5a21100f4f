#include "ttt/perf_model.hpp"

#include <iomanip>
#include <sstream>

namespace ttt {

std::string perf_points_csv(const std::vector<PerfPoint>& points) {
  double best = 0.0;
  for (const auto& p : points) best = std::max(best, p.measured_gflops);

  std::ostringstream os;
  os << "chunk,hidden,flops,bytes,ratio,measured_gflops,utilization_fraction\n";
  os << std::setprecision(10);
  for (const auto& p : points) {
    os << p.chunk << ',' << p.hidden << ',' << p.flops << ',' << p.bytes << ',' << p.ratio << ','
       << p.measured_gflops << ',' << (best > 0.0 ? p.measured_gflops / best : 0.0) << '\n';
  }
  return os.str();
}

}  // namespace ttt
