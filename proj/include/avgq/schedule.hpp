#pragma once

#include <cstddef>
#include <string>

namespace avgq {

enum class ScheduleKind { PaperFast, PaperSlow, PowerLaw };

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& s);

/**
Step-size sequence indexed by the global step n >= 1.

  PaperFast  a(n)  = 1 / ceil(n / 2)^exponent
  PaperSlow  a'(n) = 1 / (c^exponent * ln c),  c = ceil((offset + n) / scale)
  PowerLaw   a(n)  = scale / (offset + n)^exponent

The iterate driven by the schedule is only touched at steps that are
multiples of `cadence`; value(n) is the gain used at such a step.
*/
struct StepSchedule {
    ScheduleKind kind = ScheduleKind::PaperFast;
    double exponent = 0.65;
    double offset = 0.0;
    double scale = 1.0;
    long cadence = 1;

    static StepSchedule paper_fast();
    /// Slow schedule for a d x r instance: scale 1.5*d*r, offset 5000,
    /// cadence round(1.5*d*r).
    static StepSchedule paper_slow(std::size_t d, std::size_t r);
    static StepSchedule power_law(double scale, double exponent, double offset = 0.0,
                                  long cadence = 1);

    /// Throws ConfigError for n < 1 or a degenerate logarithm.
    double value(long n) const;
    bool updates_at(long n) const noexcept { return n % cadence == 0; }

    /// Throws ConfigError when the parameters cannot produce a valid
    /// positive, eventually non-increasing sequence.
    void validate() const;

    /// First update step N with a(N) < 1; the sequence is non-increasing from
    /// there on, which is where the boundedness argument starts.
    long validity_start() const;

    bool operator==(const StepSchedule&) const = default;
};

/// round(1.5 * d * r), at least 1.
long paper_cadence(std::size_t d, std::size_t r);

/// a(n) = 1 / ceil(n/2)^0.65.
double schedule_fast(long n);

/// The m-th update of the slow iterate for a d x r instance, taken at global
/// step n = paper_cadence(d, r) * m.
double schedule_slow(long m, std::size_t d, std::size_t r);

}  // namespace avgq
