#include <algorithm>
#include <cmath>
#include <limits>

#include "xwind/errors.hpp"
#include "xwind/harness.hpp"

namespace xwind {

namespace {
constexpr double kTimeSlack = 1e-9;
}

bool Metrics::all_settled() const {
    return std::all_of(events.begin(), events.end(),
                       [](const EventMetrics& e) { return e.settled; });
}

double Metrics::worst_settling_bound() const {
    double worst = 0.0;
    for (const auto& e : events) {
        worst = std::max(worst, e.settled ? e.settling_time : e.window);
    }
    return worst;
}

double Metrics::peak_disp() const {
    double peak = 0.0;
    for (const auto& e : events) {
        peak = std::max(peak, e.peak_disp);
    }
    return peak;
}

Metrics compute_metrics(const std::vector<TraceRecord>& trace, double band,
                        const std::vector<double>& events) {
    if (!(band > 0.0) || !std::isfinite(band)) {
        throw InvalidParameter("compute_metrics: band must be > 0");
    }
    Metrics m;
    m.band = band;
    if (trace.empty()) {
        return m;
    }
    std::vector<double> ev = events;
    if (ev.empty()) {
        ev.push_back(trace.front().t);
    }
    std::sort(ev.begin(), ev.end());

    for (std::size_t i = 0; i < ev.size(); ++i) {
        const double start = ev[i];
        const double stop =
            i + 1 < ev.size() ? ev[i + 1] : std::numeric_limits<double>::infinity();

        EventMetrics em;
        em.event_time = start;
        em.window = (i + 1 < ev.size() ? stop : trace.back().t) - start;

        std::size_t count = 0;
        bool any_outside = false;
        double settle_at = start;
        bool have_entry = false;
        for (std::size_t j = 0; j < trace.size(); ++j) {
            const double t = trace[j].t;
            if (t < start - kTimeSlack || t >= stop - kTimeSlack) {
                continue;
            }
            const double disp = std::abs(trace[j].wingtip_disp);
            em.peak_disp = std::max(em.peak_disp, std::isnan(disp) ? em.peak_disp : disp);
            ++count;
            if (!(disp <= band)) {
                any_outside = true;
                have_entry = false;
            } else if (!have_entry) {
                settle_at = t;
                have_entry = true;
            }
        }
        if (count == 0) {
            em.settled = false;
        } else {
            em.settled = !any_outside || have_entry;
            em.settling_time = any_outside ? settle_at - start : 0.0;
        }
        m.events.push_back(em);
    }
    return m;
}

double response_reduction_pct(double baseline_settling, double candidate_settling) {
    if (!(baseline_settling > 0.0)) {
        throw InvalidParameter("response_reduction_pct: baseline settling time must be > 0");
    }
    return (baseline_settling - candidate_settling) / baseline_settling * 100.0;
}

} // namespace xwind
