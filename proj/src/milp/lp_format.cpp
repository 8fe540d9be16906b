#include "cfx/milp/lp_format.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <string_view>
#include <unordered_set>

namespace cfx::milp {

namespace {

constexpr std::size_t kWrap = 200;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

bool reserved(std::string lower) {
    static constexpr std::array<std::string_view, 22> kWords{
        "inf", "infinity", "free", "st", "subject", "to", "bounds", "bound", "binary", "binaries", "bin",
        "general", "generals", "gen", "end", "minimize", "minimum", "min", "maximize", "maximum", "max",
        "semi"};
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    return std::find(kWords.begin(), kWords.end(), lower) != kWords.end();
}

/// Letters, digits and '_' only; never starts with a digit; at most 255 chars.
std::string sanitize(const std::string& name, char fallback_prefix, std::size_t index) {
    std::string out;
    out.reserve(name.size());
    for (unsigned char c : name) out.push_back(std::isalnum(c) || c == '_' ? static_cast<char>(c) : '_');
    if (out.empty()) out = fallback_prefix + std::to_string(index);
    if (std::isdigit(static_cast<unsigned char>(out.front()))) out.insert(out.begin(), '_');
    if (reserved(out)) out.push_back('_');
    if (out.size() > 240) out.resize(240);
    return out;
}

std::vector<std::string> unique_names(const std::vector<std::string>& raw, char prefix,
                                      std::vector<std::string>& collisions) {
    std::vector<std::string> out(raw.size());
    std::unordered_set<std::string> used;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        std::string base = sanitize(raw[i], prefix, i);
        std::string name = base;
        for (int k = 1; used.count(name); ++k) name = base + "_" + std::to_string(k);
        if (name != base) collisions.push_back(raw[i] + " -> " + name);
        used.insert(name);
        out[i] = std::move(name);
    }
    return out;
}

class LineWriter {
public:
    explicit LineWriter(std::string& out) : out_(out) {}

    void start(const std::string& head) {
        line_ = head;
    }
    void token(const std::string& t) {
        if (line_.size() + 1 + t.size() > kWrap) {
            out_ += line_;
            out_ += '\n';
            line_ = "  ";
        } else if (!line_.empty()) {
            line_ += ' ';
        }
        line_ += t;
    }
    void finish() {
        out_ += line_;
        out_ += '\n';
        line_.clear();
    }

private:
    std::string& out_;
    std::string line_;
};

void term(LineWriter& w, double coef, const std::string& name, bool first) {
    if (coef < 0.0) w.token("- " + num(-coef) + " " + name);
    else w.token((first ? "" : "+ ") + num(coef) + " " + name);
}

}  // namespace

LpExport export_lp(const Instance& inst) {
    LpExport ex;
    std::vector<std::string> raw;
    for (const auto& c : inst.columns()) raw.push_back(c.name);
    const auto cols = unique_names(raw, 'x', ex.collisions);
    raw.clear();
    for (const auto& r : inst.rows()) raw.push_back(r.name);
    const auto rows = unique_names(raw, 'r', ex.collisions);

    std::string& out = ex.text;
    out += "\\ generated by cfx\n";
    out += "Minimize\n";
    LineWriter w(out);
    w.start(" obj:");
    bool first = true;
    for (std::size_t j = 0; j < cols.size(); ++j) {
        const double c = inst.columns()[j].cost;
        if (c == 0.0) continue;
        term(w, c, cols[j], first);
        first = false;
    }
    if (inst.objective_offset != 0.0 || first) {
        const double k = inst.objective_offset;
        if (k < 0.0) w.token("- " + num(-k));
        else w.token((first ? "" : "+ ") + num(k));
        first = false;
    }
    if (inst.has_quadratic()) {
        w.token("+ [");
        bool qfirst = true;
        for (std::size_t j = 0; j < cols.size(); ++j) {
            const double q = inst.columns()[j].quad;
            if (q == 0.0) continue;
            w.token((qfirst ? "" : "+ ") + num(2.0 * q) + " " + cols[j] + " ^ 2");
            qfirst = false;
        }
        w.token("] / 2");
    }
    w.finish();

    out += "Subject To\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = inst.rows()[i];
        w.start(" " + rows[i] + ":");
        bool rfirst = true;
        for (const auto& t : r.terms) {
            term(w, t.coef, cols[t.col], rfirst);
            rfirst = false;
        }
        if (rfirst) w.token("0 " + cols.front());
        const char* op = r.sense == Sense::LessEqual ? "<=" : r.sense == Sense::GreaterEqual ? ">=" : "=";
        w.token(op);
        w.token(num(r.rhs));
        w.finish();
    }

    out += "Bounds\n";
    std::vector<std::size_t> binaries, generals;
    for (std::size_t j = 0; j < cols.size(); ++j) {
        const auto& c = inst.columns()[j];
        const bool binary = c.integer && c.lower == 0.0 && c.upper == 1.0;
        if (binary) {
            binaries.push_back(j);
            continue;
        }
        if (c.integer) generals.push_back(j);
        if (c.lower == c.upper) out += " " + cols[j] + " = " + num(c.lower) + "\n";
        else out += " " + num(c.lower) + " <= " + cols[j] + " <= " + num(c.upper) + "\n";
    }
    auto section = [&](const char* title, const std::vector<std::size_t>& idx) {
        if (idx.empty()) return;
        out += title;
        out += '\n';
        w.start("");
        for (std::size_t j : idx) w.token(cols[j]);
        w.finish();
    };
    section("Binary", binaries);
    section("General", generals);
    out += "End\n";
    return ex;
}

}  // namespace cfx::milp
