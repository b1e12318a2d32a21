#include "avgq/schedule.hpp"

#include <cmath>

#include "avgq/errors.hpp"

namespace avgq {

std::string to_string(ScheduleKind kind) {
    switch (kind) {
        case ScheduleKind::PaperFast: return "paper-fast";
        case ScheduleKind::PaperSlow: return "paper-slow";
        case ScheduleKind::PowerLaw: return "power-law";
    }
    return "unknown";
}

ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "paper-fast") return ScheduleKind::PaperFast;
    if (s == "paper-slow") return ScheduleKind::PaperSlow;
    if (s == "power-law") return ScheduleKind::PowerLaw;
    throw ConfigError("unknown schedule kind '" + s + "'");
}

long paper_cadence(std::size_t d, std::size_t r) {
    const long c = std::lround(1.5 * static_cast<double>(d) * static_cast<double>(r));
    return c < 1 ? 1 : c;
}

StepSchedule StepSchedule::paper_fast() {
    return StepSchedule{ScheduleKind::PaperFast, 0.65, 0.0, 2.0, 1};
}

StepSchedule StepSchedule::paper_slow(std::size_t d, std::size_t r) {
    return StepSchedule{ScheduleKind::PaperSlow, 0.65, 5000.0,
                        1.5 * static_cast<double>(d) * static_cast<double>(r),
                        paper_cadence(d, r)};
}

StepSchedule StepSchedule::power_law(double scale, double exponent, double offset, long cadence) {
    return StepSchedule{ScheduleKind::PowerLaw, exponent, offset, scale, cadence};
}

double StepSchedule::value(long n) const {
    if (n < 1) throw ConfigError("step size requested at n = " + std::to_string(n) + " < 1");
    const auto x = static_cast<double>(n);
    switch (kind) {
        case ScheduleKind::PaperFast:
            return 1.0 / std::pow(std::ceil(x / scale), exponent);
        case ScheduleKind::PaperSlow: {
            const double c = std::ceil((offset + x) / scale);
            if (!(c > 1.0)) {
                throw ConfigError("slow schedule: log argument " + std::to_string(c) + " <= 1");
            }
            return 1.0 / (std::pow(c, exponent) * std::log(c));
        }
        case ScheduleKind::PowerLaw:
            return scale / std::pow(offset + x, exponent);
    }
    return 0.0;
}

void StepSchedule::validate() const {
    if (cadence < 1) throw ConfigError("schedule cadence must be >= 1");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("schedule scale must be > 0");
    if (!(exponent > 0.0) || !(exponent <= 1.0)) {
        throw ConfigError("schedule exponent must lie in (0, 1]");
    }
    switch (kind) {
        case ScheduleKind::PaperFast:
            break;
        case ScheduleKind::PaperSlow:
            if (offset < 0.0) throw ConfigError("slow schedule offset must be >= 0");
            // Smallest argument is reached at the first update step.
            (void)value(cadence);
            break;
        case ScheduleKind::PowerLaw:
            if (!(exponent > 0.5)) throw ConfigError("power-law exponent must lie in (0.5, 1]");
            if (offset + 1.0 <= 0.0) throw ConfigError("power-law offset must exceed -1");
            break;
    }
}

long StepSchedule::validity_start() const {
    validate();
    // a(n) is non-increasing at update steps for every kind, so a(n) < 1 is a
    // monotone predicate over update indices m (n = m * cadence).
    auto below_one = [&](long m) { return value(m * cadence) < 1.0; };
    long hi = 1;
    while (!below_one(hi)) {
        if (hi > (1L << 40)) throw ConfigError("schedule never drops below 1");
        hi *= 2;
    }
    long lo = hi / 2;  // below_one(lo) is false or lo == 0
    if (hi == 1) return cadence;
    while (hi - lo > 1) {
        const long mid = lo + (hi - lo) / 2;
        (below_one(mid) ? hi : lo) = mid;
    }
    return hi * cadence;
}

double schedule_fast(long n) {
    if (n < 1) throw ConfigError("schedule_fast: n must be >= 1");
    return StepSchedule::paper_fast().value(n);
}

double schedule_slow(long m, std::size_t d, std::size_t r) {
    if (m < 1) throw ConfigError("schedule_slow: m must be >= 1");
    const auto s = StepSchedule::paper_slow(d, r);
    return s.value(m * s.cadence);
}

}  // namespace avgq
