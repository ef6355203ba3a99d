#pragma once

#include <iosfwd>
#include <span>

#include "grkt/data.hpp"
#include "grkt/model.hpp"

namespace grkt {

/// One row per (step, KC): student, seq_index, step, timestamp, kc,
/// mastery_pre, mastery_post, predicted, correct. Ids are written as their
/// original names when `ds` is given.
void write_trace_csv(std::ostream& out, std::span<const MasteryTrace> traces, const Dataset* ds = nullptr);
void write_trace_json(std::ostream& out, std::span<const MasteryTrace> traces, const Dataset* ds = nullptr);

/// Plot channel: mastery of every KC at each phase boundary in time order
/// (pre, post, learned) with columns student, seq_index, step, phase, timestamp, kc, mastery.
void write_full_channel_csv(std::ostream& out, std::span<const MasteryTrace> traces, const Dataset* ds = nullptr);

}  // namespace grkt
