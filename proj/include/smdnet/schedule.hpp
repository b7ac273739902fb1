#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "smdnet/errors.hpp"

namespace smdnet {

// Step-size schedule alpha_t. robbins_monro: a/(b+t)^rho with a>0, b>=1 and
// rho in (0.5, 1], which is square-summable but not summable. adaptive_oracle
// needs the current objective gap and realizes alpha_t = (f[p_t]-f*)/(4 L^2).
class StepSchedule {
 public:
  enum class Kind { RobbinsMonro, Constant, AdaptiveOracle };

  static StepSchedule robbins_monro(double a = 1.0, double b = 1.0, double rho = 0.75) {
    if (!(a > 0.0) || !(b >= 1.0) || !(rho > 0.5) || !(rho <= 1.0))
      throw ConfigError("robbins_monro schedule needs a>0, b>=1, rho in (0.5,1]");
    StepSchedule s;
    s.kind_ = Kind::RobbinsMonro;
    s.a_ = a;
    s.b_ = b;
    s.rho_ = rho;
    return s;
  }

  static StepSchedule constant(double alpha) {
    if (!(alpha >= 0.0)) throw ConfigError("constant schedule needs alpha >= 0");
    StepSchedule s;
    s.kind_ = Kind::Constant;
    s.a_ = alpha;
    return s;
  }

  static StepSchedule adaptive_oracle(double sup_bound, double f_star) {
    if (!(sup_bound > 0.0)) throw ConfigError("adaptive_oracle schedule needs L > 0");
    StepSchedule s;
    s.kind_ = Kind::AdaptiveOracle;
    s.a_ = sup_bound;
    s.b_ = f_star;
    return s;
  }

  // Forms: "const:0.5", "rm:a,b,rho", "rm" (defaults), "adaptive:L,fstar".
  static StepSchedule parse(const std::string& text) {
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    std::vector<double> args;
    if (colon != std::string::npos) {
      std::stringstream ss(text.substr(colon + 1));
      std::string tok;
      while (std::getline(ss, tok, ',')) args.push_back(std::stod(tok));
    }
    if (head == "const" && args.size() == 1) return constant(args[0]);
    if (head == "rm" && args.empty()) return robbins_monro();
    if (head == "rm" && args.size() == 2) return robbins_monro(args[0], args[1]);
    if (head == "rm" && args.size() == 3) return robbins_monro(args[0], args[1], args[2]);
    if (head == "adaptive" && args.size() == 2) return adaptive_oracle(args[0], args[1]);
    throw ConfigError("cannot parse schedule '" + text + "'");
  }

  Kind kind() const { return kind_; }

  bool needs_objective() const { return kind_ == Kind::AdaptiveOracle; }

  double alpha(int t, double f_current = 0.0) const {
    switch (kind_) {
      case Kind::Constant:
        return a_;
      case Kind::RobbinsMonro:
        return a_ / std::pow(b_ + t, rho_);
      case Kind::AdaptiveOracle: {
        const double gap = f_current - b_;
        return gap > 0.0 ? gap / (4.0 * a_ * a_) : 0.0;
      }
    }
    return 0.0;
  }

  std::string to_string() const {
    std::ostringstream os;
    switch (kind_) {
      case Kind::Constant:
        os << "const:" << a_;
        break;
      case Kind::RobbinsMonro:
        os << "rm:" << a_ << "," << b_ << "," << rho_;
        break;
      case Kind::AdaptiveOracle:
        os << "adaptive:" << a_ << "," << b_;
        break;
    }
    return os.str();
  }

 private:
  Kind kind_ = Kind::RobbinsMonro;
  double a_ = 1.0;
  double b_ = 1.0;
  double rho_ = 0.75;
};

}  // namespace smdnet
