#pragma once

#include <chrono>
#include <map>
#include <nlohmann/json.hpp>

#include "gkac/core.hpp"

// Check records and verification reports with a canonical machine rendering:
// keys sorted, residuals in scientific notation with six significant digits,
// newline-terminated, byte-stable across runs for fixed inputs and seed.
namespace gkac {

struct CheckRecord {
  std::string name;
  std::string anchor;
  double residual = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

/// Compiled-in anchor table: every check name maps to the identity it
/// verifies, written as a formula.
inline const std::map<std::string, std::string>& anchorTable() {
  static const std::map<std::string, std::string> table = {
      {"groupoid-axioms", "r(xy)=r(x), s(xy)=s(y), (xy)z=x(yz), x x^-1 = e_r(x)"},
      {"haar-left-invariance", "lambda(xy) = lambda(y) for composable (x,y)"},
      {"measure-involution", "D(x^-1) = D(x)^-1"},
      {"measure-cocycle", "D(x) D(y) D(y^-1 x^-1) = 1"},
      {"measure-mass", "nu(G) = sum_u mu(u) lambda(G^u)"},
      {"base-dimension", "dim B = |G^0|"},
      {"fact-axioms-alpha", "[a* a]=B, [a B]=a, [a H_B]=H, rho(b)xi=xi b"},
      {"fact-axioms-beta", "[a* a]=B, [a B]=a, [a H_B]=H, rho(b)xi=xi b"},
      {"fact-axioms-alphahat", "[a* a]=B, [a B]=a, [a H_B]=H, rho(b)xi=xi b"},
      {"fact-axioms-betahat", "[a* a]=B, [a B]=a, [a H_B]=H, rho(b)xi=xi b"},
      {"compat-alpha-beta", "[rho_1(B) f_2] = f_2 and [rho_2(B) f_1] = f_1"},
      {"compat-alpha-alphahat", "[rho_1(B) f_2] = f_2 and [rho_2(B) f_1] = f_1"},
      {"compat-alpha-betahat", "[rho_1(B) f_2] = f_2 and [rho_2(B) f_1] = f_1"},
      {"compat-beta-alphahat", "[rho_1(B) f_2] = f_2 and [rho_2(B) f_1] = f_1"},
      {"compat-beta-betahat", "[rho_1(B) f_2] = f_2 and [rho_2(B) f_1] = f_1"},
      {"compat-alphahat-betahat", "[rho_1(B) f_2] = f_2 and [rho_2(B) f_1] = f_1"},
      {"unitary-v", "V* V = 1 = V V*"},
      {"unitary-u", "U* U = 1"},
      {"unitary-vcheck", "Vc* Vc = 1 = Vc Vc*"},
      {"unitary-vhat", "Vh* Vh = 1 = Vh Vh*"},
      {"unitary-vop", "Vop* Vop = 1 = Vop Vop*"},
      {"u-selfadjoint", "U = U*"},
      {"u-squared", "U^2 = 1"},
      {"u-maps-alpha", "U alpha = alphahat"},
      {"u-maps-beta", "U beta = betahat"},
      {"perm-structure", "entries of V, U, Sigma lie in {0} u (0,inf) exactly"},
      {"intertwine-v-1", "V(a <| a) = a |> a"},
      {"intertwine-v-2", "V(bh |> b) = bh <| b"},
      {"intertwine-v-3", "V(bh |> bh) = a |> bh"},
      {"intertwine-v-4", "V(b <| a) = b <| b"},
      {"intertwine-v-5", "V(bh |> ah) = a |> ah"},
      {"intertwine-v-6", "V(ah <| a) = ah <| b"},
      {"intertwine-vcheck-1", "Vc(a <| a) = a |> a (predual labels)"},
      {"intertwine-vcheck-2", "Vc(bh |> b) = bh <| b (predual labels)"},
      {"intertwine-vcheck-3", "Vc(bh |> bh) = a |> bh (predual labels)"},
      {"intertwine-vcheck-4", "Vc(b <| a) = b <| b (predual labels)"},
      {"intertwine-vcheck-5", "Vc(bh |> ah) = a |> ah (predual labels)"},
      {"intertwine-vcheck-6", "Vc(ah <| a) = ah <| b (predual labels)"},
      {"intertwine-vhat-1", "Vh(a <| a) = a |> a (dual labels)"},
      {"intertwine-vhat-2", "Vh(bh |> b) = bh <| b (dual labels)"},
      {"intertwine-vhat-3", "Vh(bh |> bh) = a |> bh (dual labels)"},
      {"intertwine-vhat-4", "Vh(b <| a) = b <| b (dual labels)"},
      {"intertwine-vhat-5", "Vh(bh |> ah) = a |> ah (dual labels)"},
      {"intertwine-vhat-6", "Vh(ah <| a) = ah <| b (dual labels)"},
      {"pentagon-v", "V12 V13 V23 = V23 V12"},
      {"pentagon-vcheck", "Vc12 Vc13 Vc23 = Vc23 Vc12"},
      {"pentagon-vhat", "Vh12 Vh13 Vh23 = Vh23 Vh12"},
      {"pentagon-vop-pairing", "|pent(V) - pent(Vop)| from (Vop)c = (Vh)op"},
      {"pentagon-aduu-pairing", "|pent(Ad_{UxU}V) - pent(V)|"},
      {"regular-v", "[<a|_1 V |a>_2] = [a a*]"},
      {"regular-vcheck", "[<a'|_1 Vc |a'>_2] = [a' a'*] (predual labels)"},
      {"regular-vhat", "[<a''|_1 Vh |a''>_2] = [a'' a''*] (dual labels)"},
      {"legs-algebra-ahat", "[Ahat Ahat] = Ahat and Ahat* = Ahat"},
      {"legs-algebra-a", "[A A] = A and A* = A"},
      {"legs-absorb-ahat", "[Ahat rho(B)] = [rho(B) Ahat] = Ahat, both rho"},
      {"legs-absorb-a", "[A rho(B)] = [rho(B) A] = A, both rho"},
      {"legs-module-ahat", "Ahat beta <= beta, Ahat* beta <= beta"},
      {"legs-module-a", "A betahat <= betahat, A* betahat <= betahat"},
      {"legs-halpha-ahat", "[Ahat alphahat] = alphahat"},
      {"legs-halpha-a", "[A alphahat] = alphahat"},
      {"coassoc-ahat", "(Dh x id)Dh = (id x Dh)Dh on generators"},
      {"coassoc-a", "(D x id)D = (id x D)D on generators"},
      {"weak-kac-ahat-commute", "Ahat and Ad_U(Ahat) commute"},
      {"weak-kac-a-commute", "A and Ad_U(A) commute"},
      {"weak-kac-ahat-intertwine", "(Ad_U(ahat) x 1) V = V (Ad_U(ahat) x 1)"},
      {"weak-kac-a-intertwine", "(1 x Ad_U(a)) V = V (1 x Ad_U(a))"},
      {"weak-kac-ahat-diagram", "Vh12 V23 = V23 Vh12"},
      {"weak-kac-a-diagram", "V12 Vc23 = Vc23 V12"},
      {"kac-cube", "(Sigma U2 V)^3 = 1"},
      {"kac-vvv", "Vh V Vc = U1 Sigma"},
      {"kac-cube-rot1", "(U2 V Sigma)^3 = 1"},
      {"kac-cube-rot2", "(V Sigma U2)^3 = 1"},
      {"kac-agreement", "the four cube/rearranged forms agree in pass/fail"},
      {"balanced-legs-1", "Ahat(Vc) = Ad_U(A(V))"},
      {"balanced-legs-2", "Dhat_{Vc} = Ad_{UxU} o D_V o Ad_U"},
      {"balanced-legs-3", "A(Vc) = Ahat(V)"},
      {"balanced-legs-4", "D_{Vc} = Dhat_V"},
      {"balanced-legs-5", "A(Vh) = Ad_U(Ahat(V))"},
      {"balanced-legs-6", "D_{Vh} = Ad_{UxU} o Dhat_V o Ad_U"},
      {"balanced-legs-7", "Ahat(Vh) = A(V)"},
      {"balanced-legs-8", "Dhat_{Vh} = D_V"},
      {"vhat-equals-vop", "Vh = Vop as matrices"},
      {"vcheck-iterate", "(Vc)c = Ad_{UxU}(V)"},
      {"op-recode", "(Vop)c = (Vh)op"},
      {"kac-compact", "[A(V) Ahat(V)] = [ah ah*]"},
      {"kac-aux", "[V |a>_2 Ahat(V)] = [|b>_2 Ahat(V)]"},
      {"leg-dims", "dim Ahat and dim A match the independent span oracle"},
      {"coaction-homomorphism", "delta(xy) = delta(x)delta(y), delta(x*) = delta(x)*"},
      {"coaction-morphism", "target fact = [L^delta . gamma]"},
      {"coaction-coassoc", "(delta x id)delta = (id x Delta)delta on generators"},
      {"coaction-fine-injective", "delta injective"},
      {"coaction-fine-span", "[delta(C) |b>_2] = [|b>_2 C]"},
      {"coaction-in-fiber", "delta(C) <= C * M(A) membership residuals"},
      {"crossed-product-algebra", "[delta(C)(1 x Ahat)] is a C*-algebra"},
      {"crossed-product-commute", "[(1 x Ahat) delta(C)] <= [delta(C)(1 x Ahat)]"},
      {"crossed-product-in-fiber", "C x| Ahat <= C * L(H)"},
      {"dual-coaction-generators", "dhat(delta(c)(1 x ahat)) = (delta(c) x 1)(1 x Dhat(ahat))"},
      {"dual-coaction-axioms", "the dual coaction satisfies the coaction axioms"},
      {"dual-coaction-fine", "dhat(C x| Ahat)|a>_3 <= [|a>_3 (C x| Ahat)]"},
      {"duality-stage1", "iterated crossed product assembled on K x H x H"},
      {"duality-stage2", "Ad_{1 x V}(CP2) = [delta2(C)(1 x 1 x Ahat Ad_U(A))]"},
      {"duality-stage3", "[Ahat Ad_U(A)] = [b b*]"},
      {"duality-stage4", "collapse delta2(c)(1 x 1 x T) -> delta(c)(1 x T) well-defined, multiplicative"},
      {"duality-stage5", "image = [|b>_2 C <b|_2]"},
      {"duality-stage6", "bidual = Ad_{1 x Sigma Vh} o Ind_b(delta) on generators"},
      {"duality-dim-match", "dim(iterated crossed product) = dim(bracket span)"},
      {"functor-generators", "(rho x| id)(delta_C(c)(1 x ahat)) = delta_D(rho(c))(1 x ahat)"},
      {"functor-covariance", "dual coactions intertwine (rho x| id) on generators"},
      {"induce-welldefined", "|xi>_2 c <xi'|_2 -> |xi>_2 rho(c) <xi'|_2 respects relations"},
      {"induce-homomorphism", "Ind(rho) is a *-homomorphism on sampled products"},
  };
  return table;
}

inline std::string anchorOf(const std::string& name) {
  const auto& t = anchorTable();
  auto it = t.find(name);
  if (it != t.end()) return it->second;
  // Family lookup: strip a trailing -<suffix> once.
  auto pos = name.rfind('-');
  if (pos != std::string::npos) {
    auto it2 = t.find(name.substr(0, pos));
    if (it2 != t.end()) return it2->second;
  }
  return "(unanchored)";
}

inline CheckRecord makeRecord(const std::string& name, double residual, double threshold) {
  CheckRecord r;
  r.name = name;
  r.anchor = anchorOf(name);
  r.residual = residual;
  r.threshold = threshold;
  r.pass = residual < threshold;
  return r;
}

struct VerificationReport {
  std::string toolVersion;
  std::string command;
  std::string inputDigest;
  double tolerance = 0.0;
  std::uint64_t seed = 0;
  std::string negativeControl;
  std::vector<CheckRecord> checks;
  std::map<std::string, Index> dimensions;
  double wallMs = 0.0;

  bool overallPass() const {
    for (const CheckRecord& c : checks)
      if (!c.pass) return false;
    return true;
  }

  void add(CheckRecord r) { checks.push_back(std::move(r)); }
  void add(const std::string& name, double residual, double threshold) {
    checks.push_back(makeRecord(name, residual, threshold));
  }

  void sortChecks() {
    std::sort(checks.begin(), checks.end(),
              [](const CheckRecord& a, const CheckRecord& b) { return a.name < b.name; });
  }

  /// Canonical machine rendering. Keys sorted; residuals and thresholds as
  /// %.5e strings; no timing (it would break byte-stability); newline at end.
  std::string machine() const {
    nlohmann::json j;
    j["command"] = command;
    j["input_digest"] = inputDigest;
    j["negative_control"] = negativeControl;
    j["overall_pass"] = overallPass();
    j["seed"] = seed;
    j["tolerance"] = sci6(tolerance);
    j["version"] = toolVersion;
    nlohmann::json arr = nlohmann::json::array();
    std::vector<CheckRecord> sorted = checks;
    std::sort(sorted.begin(), sorted.end(),
              [](const CheckRecord& a, const CheckRecord& b) { return a.name < b.name; });
    for (const CheckRecord& c : sorted) {
      nlohmann::json e;
      e["anchor"] = c.anchor;
      e["name"] = c.name;
      e["pass"] = c.pass;
      e["residual"] = sci6(c.residual);
      e["threshold"] = sci6(c.threshold);
      arr.push_back(e);
    }
    j["checks"] = arr;
    nlohmann::json dims;
    for (const auto& [k, v] : dimensions) dims[k] = static_cast<long long>(v);
    j["dimensions"] = dims;
    return j.dump(2) + "\n";
  }

  std::string text() const {
    std::ostringstream os;
    os << toolVersion << "  command=" << command << "  digest=" << inputDigest << "\n";
    if (!negativeControl.empty()) os << "negative-control: " << negativeControl << "\n";
    os << "tolerance=" << sci6(tolerance) << "  seed=" << seed << "\n";
    std::vector<CheckRecord> sorted = checks;
    std::sort(sorted.begin(), sorted.end(),
              [](const CheckRecord& a, const CheckRecord& b) { return a.name < b.name; });
    for (const CheckRecord& c : sorted) {
      os << (c.pass ? "  ok   " : "  FAIL ") << c.name << "  residual=" << sci6(c.residual)
         << "  threshold=" << sci6(c.threshold) << "  [" << c.anchor << "]\n";
    }
    if (!dimensions.empty()) {
      os << "dimensions:\n";
      for (const auto& [k, v] : dimensions) os << "  " << k << " = " << v << "\n";
    }
    os << "elapsed_ms=" << wallMs << "\n";
    os << (overallPass() ? "OVERALL PASS" : "OVERALL FAIL") << "\n";
    return os.str();
  }
};

}  // namespace gkac
