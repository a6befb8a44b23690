#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "xwind/errors.hpp"
#include "xwind/harness.hpp"

namespace xwind {

namespace {

void append_double(std::string& out, double v) {
    std::array<char, 32> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    out.append(buf.data(), ptr);
}

double parse_field(std::string_view s, std::size_t line) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw Error("trace line " + std::to_string(line) + ": bad number '" + std::string(s) +
                    "'");
    }
    return v;
}

} // namespace

std::string format_trace(const std::vector<TraceRecord>& trace) {
    std::string out;
    out.reserve(trace.size() * 160 + kTraceHeader.size() + 1);
    out.append(kTraceHeader);
    out.push_back('\n');
    for (const auto& r : trace) {
        for (double v : {r.t, r.theta, r.theta_dot, r.wingtip_disp, r.cmd_torque,
                         r.applied_torque, r.tau_w_true, r.tau_w_hat, r.tau_w_hat_filtered}) {
            append_double(out, v);
            out.push_back(',');
        }
        out.append(std::to_string(r.qp_status));
        out.push_back('\n');
    }
    return out;
}

void write_trace(const std::vector<TraceRecord>& trace, const std::filesystem::path& path) {
    const std::string text = format_trace(trace);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.close();
    if (!out) {
        throw Error("failed writing " + path.string());
    }
}

std::vector<TraceRecord> parse_trace(std::string_view csv) {
    std::vector<TraceRecord> trace;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (pos < csv.size()) {
        auto eol = csv.find('\n', pos);
        if (eol == std::string_view::npos) {
            eol = csv.size();
        }
        std::string_view line = csv.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (!header_seen) {
            if (line != kTraceHeader) {
                throw Error("trace: unexpected header '" + std::string(line) + "'");
            }
            header_seen = true;
            continue;
        }
        if (line.empty()) {
            continue;
        }
        std::array<std::string_view, 10> fields;
        std::size_t n = 0;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            if (n == fields.size()) {
                throw Error("trace line " + std::to_string(line_no) + ": too many fields");
            }
            fields[n++] = line.substr(start, comma - start);
            if (comma == std::string_view::npos) {
                break;
            }
            start = comma + 1;
        }
        if (n != fields.size()) {
            throw Error("trace line " + std::to_string(line_no) + ": expected 10 fields");
        }
        TraceRecord r;
        r.t = parse_field(fields[0], line_no);
        r.theta = parse_field(fields[1], line_no);
        r.theta_dot = parse_field(fields[2], line_no);
        r.wingtip_disp = parse_field(fields[3], line_no);
        r.cmd_torque = parse_field(fields[4], line_no);
        r.applied_torque = parse_field(fields[5], line_no);
        r.tau_w_true = parse_field(fields[6], line_no);
        r.tau_w_hat = parse_field(fields[7], line_no);
        r.tau_w_hat_filtered = parse_field(fields[8], line_no);
        int status = 0;
        const auto [ptr, ec] =
            std::from_chars(fields[9].data(), fields[9].data() + fields[9].size(), status);
        if (ec != std::errc() || ptr != fields[9].data() + fields[9].size()) {
            throw Error("trace line " + std::to_string(line_no) + ": bad qp_status");
        }
        r.qp_status = status;
        trace.push_back(r);
    }
    if (!header_seen) {
        throw Error("trace: missing header");
    }
    return trace;
}

std::string format_metrics(const std::string& name, const Metrics& m) {
    std::ostringstream os;
    os.precision(6);
    os << "scenario = " << name << '\n';
    os << "band = " << m.band << '\n';
    os << "events = " << m.events.size() << '\n';
    for (std::size_t i = 0; i < m.events.size(); ++i) {
        const auto& e = m.events[i];
        os << "event." << i << ".time = " << e.event_time << '\n';
        if (e.settled) {
            os << "event." << i << ".settling_time = " << e.settling_time << '\n';
        } else {
            os << "event." << i << ".settling_time = not-settled (window " << e.window
               << " s)\n";
        }
        os << "event." << i << ".peak_disp = " << e.peak_disp << '\n';
    }
    os << "all_settled = " << (m.all_settled() ? "true" : "false") << '\n';
    os << "worst_settling = " << m.worst_settling_bound()
       << (m.all_settled() ? "" : " (lower bound)") << '\n';
    os << "peak_disp = " << m.peak_disp() << '\n';
    return os.str();
}

} // namespace xwind
