#include "cfx/formulation.hpp"

#include <stdexcept>

namespace cfx {

std::string VariableRegistry::name_of(const Symbol& s) {
    const std::string a = std::to_string(s.a);
    const std::string b = std::to_string(s.b);
    switch (s.kind) {
        case SymbolKind::Lambda: return "lambda_t" + a + "_d" + b;
        case SymbolKind::Y: return "y_t" + a + "_v" + b;
        case SymbolKind::IsoLambda: return "lambda_iso" + a + "_d" + b;
        case SymbolKind::IsoY: return "y_iso" + a + "_v" + b;
        case SymbolKind::Mu: return "mu_f" + a + "_" + b;
        case SymbolKind::X: return "x_f" + a;
        case SymbolKind::Nu: return "nu_f" + a + "_" + b;
        case SymbolKind::Omega: return "omega_f" + a + "_" + b;
        case SymbolKind::Z: return "z_c" + a;
        case SymbolKind::ZNeg: return "zneg_f" + a;
        case SymbolKind::ZPos: return "zpos_f" + a;
    }
    return {};
}

int VariableRegistry::add(milp::Instance& inst, const Symbol& s, milp::Column c) {
    if (by_symbol_.count(s)) throw std::logic_error("duplicate symbol " + name_of(s));
    if (static_cast<std::size_t>(inst.num_columns()) != symbols_.size())
        throw std::logic_error("instance has columns outside the registry");
    c.name = name_of(s);
    const int col = inst.add_column(c);
    symbols_.push_back(s);
    by_symbol_.emplace(s, col);
    by_name_.emplace(c.name, col);
    return col;
}

std::optional<int> VariableRegistry::find(const Symbol& s) const {
    const auto it = by_symbol_.find(s);
    if (it == by_symbol_.end()) return std::nullopt;
    return it->second;
}

std::optional<int> VariableRegistry::find(std::string_view name) const {
    const auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
}

int VariableRegistry::at(const Symbol& s) const {
    const auto c = find(s);
    if (!c) throw std::out_of_range("no column for " + name_of(s));
    return *c;
}

}  // namespace cfx
