#include "grkt/trace.hpp"

#include <iomanip>
#include <ostream>
#include <string>

#include "json.hpp"

namespace grkt {

namespace {

std::string student_name(const MasteryTrace& t, const Dataset* ds) {
  return ds && t.student < ds->students.size() ? ds->students.name(t.student) : std::to_string(t.student);
}

std::string kc_name(std::size_t c, const Dataset* ds) {
  return ds && c < ds->kcs.size() ? ds->kcs.name(static_cast<KcId>(c)) : std::to_string(c);
}

}  // namespace

void write_trace_csv(std::ostream& out, std::span<const MasteryTrace> traces, const Dataset* ds) {
  out << "student,seq_index,step,timestamp,kc,mastery_pre,mastery_post,predicted,correct\n";
  out << std::setprecision(17);
  for (const auto& t : traces) {
    const auto student = student_name(t, ds);
    for (const auto& s : t.steps)
      for (std::size_t c = 0; c < s.post.size(); ++c)
        out << student << ',' << t.sequence << ',' << s.step << ',' << s.timestamp << ',' << kc_name(c, ds) << ','
            << s.pre[c] << ',' << s.post[c] << ',' << s.predicted << ',' << int(s.correct) << '\n';
  }
}

void write_trace_json(std::ostream& out, std::span<const MasteryTrace> traces, const Dataset* ds) {
  using nlohmann::json;
  json arr = json::array();
  for (const auto& t : traces) {
    json steps = json::array();
    for (const auto& s : t.steps) {
      json kcs = json::array();
      for (auto c : s.kcs) kcs.push_back(kc_name(c, ds));
      steps.push_back({{"step", s.step},
                       {"timestamp", s.timestamp},
                       {"question", ds && s.question < ds->questions.size() ? ds->questions.name(s.question)
                                                                            : std::to_string(s.question)},
                       {"kcs", kcs},
                       {"correct", s.correct},
                       {"predicted", s.predicted},
                       {"mastery_pre", s.pre},
                       {"mastery_post", s.post},
                       {"mastery_after_learning", s.after_learning}});
    }
    json kc_names = json::array();
    const std::size_t n = t.steps.empty() ? 0 : t.steps.front().post.size();
    for (std::size_t c = 0; c < n; ++c) kc_names.push_back(kc_name(c, ds));
    arr.push_back({{"student", student_name(t, ds)}, {"seq_index", t.sequence}, {"kcs", kc_names}, {"steps", steps}});
  }
  out << json{{"format", "grkt-trace"}, {"version", 1}, {"traces", arr}}.dump(1) << '\n';
}

void write_full_channel_csv(std::ostream& out, std::span<const MasteryTrace> traces, const Dataset* ds) {
  out << "student,seq_index,step,phase,timestamp,kc,mastery\n";
  out << std::setprecision(17);
  for (const auto& t : traces) {
    const auto student = student_name(t, ds);
    for (const auto& s : t.steps) {
      auto emit = [&](const char* phase, const std::vector<double>& m) {
        for (std::size_t c = 0; c < m.size(); ++c)
          out << student << ',' << t.sequence << ',' << s.step << ',' << phase << ',' << s.timestamp << ','
              << kc_name(c, ds) << ',' << m[c] << '\n';
      };
      emit("pre", s.pre);
      emit("post", s.post);
      emit("learned", s.after_learning);
    }
  }
}

}  // namespace grkt
