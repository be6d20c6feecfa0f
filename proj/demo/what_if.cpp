// Compares quality of life under low and high crime on the standard
// SED template, then lists the strongest indirect influences of crime.
#include <cstdio>

#include "fcm/fcm.hpp"

int main() {
  using namespace fcm;
  const FcmModel model = builtin_sed_template();
  const auto config = SimulationConfig::defaults_for(model.range);
  const auto qol = *model.index_of(kQualityOfLife);

  for (double level : {0.1, 0.9}) {
    Scenario s{"crime " + format_value(level), {{kCrime, level}}, {}};
    const auto r = simulate(model, config, s);
    std::printf("%-10s outcome=%-16s quality_of_life=%s\n", s.name.c_str(),
                to_string(r.outcome).c_str(), format_value(r.final_state().values[qol]).c_str());
  }

  const auto closure = transitive_closure(model);
  const auto report = influence_report(closure);
  const auto crime = *model.index_of(kCrime);
  std::printf("\ninfluence of crime (v, consonance):\n");
  for (std::size_t j = 0; j < model.size(); ++j) {
    if (report.influence(crime, j) == 0.0) continue;
    std::printf("  %-18s %+.4f  %.3f\n", model.concepts[j].id.str().c_str(), report.influence(crime, j),
                report.consonance(crime, j));
  }
}
