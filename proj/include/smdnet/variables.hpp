#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "smdnet/errors.hpp"

namespace smdnet {

// Identifier into VariableLayout::variables. Densities order their blocks by
// ascending id, which is the layout's global order; every cross-agent
// operation therefore lines up block-wise without explicit permutations.
using VarId = int;

struct Variable {
  VarId id = -1;
  int dim = 1;
  std::string name;
};

// Global registry of estimation variables and the per-agent relevant subsets.
class VariableLayout {
 public:
  VariableLayout() = default;

  VarId add_variable(const std::string& name, int dim) {
    if (dim <= 0) throw LayoutError("variable '" + name + "' must have positive dim");
    for (const auto& v : variables_)
      if (v.name == name) throw LayoutError("duplicate variable name '" + name + "'");
    const VarId id = static_cast<VarId>(variables_.size());
    variables_.push_back({id, dim, name});
    return id;
  }

  void set_agent_subset(int agent, std::vector<VarId> vars) {
    if (vars.empty()) throw LayoutError("agent subset must be nonempty");
    std::sort(vars.begin(), vars.end());
    for (VarId v : vars) check_id(v);
    if (std::adjacent_find(vars.begin(), vars.end()) != vars.end())
      throw LayoutError("agent subset contains a repeated variable");
    if (agent >= static_cast<int>(agent_subsets_.size())) agent_subsets_.resize(agent + 1);
    agent_subsets_[agent] = std::move(vars);
  }

  int num_variables() const { return static_cast<int>(variables_.size()); }
  int num_agents() const { return static_cast<int>(agent_subsets_.size()); }

  const Variable& variable(VarId id) const {
    check_id(id);
    return variables_[id];
  }

  int dim_of(VarId id) const { return variable(id).dim; }

  // d = sum of all variable dims.
  int total_dim() const {
    int d = 0;
    for (const auto& v : variables_) d += v.dim;
    return d;
  }

  const std::vector<VarId>& agent_subset(int agent) const {
    if (agent < 0 || agent >= num_agents()) throw LayoutError("unknown agent index");
    return agent_subsets_[agent];
  }

  // Dimension of agent i's local state X_i.
  int agent_dim(int agent) const {
    int d = 0;
    for (VarId v : agent_subset(agent)) d += dim_of(v);
    return d;
  }

  std::vector<VarId> shared_subset(int agent_i, int agent_j) const {
    const auto& a = agent_subset(agent_i);
    const auto& b = agent_subset(agent_j);
    std::vector<VarId> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
  }

  // Agents estimating a given variable (the set V(x)).
  std::vector<int> owners(VarId id) const {
    check_id(id);
    std::vector<int> out;
    for (int a = 0; a < num_agents(); ++a) {
      const auto& s = agent_subsets_[a];
      if (std::binary_search(s.begin(), s.end(), id)) out.push_back(a);
    }
    return out;
  }

  // Every variable must be estimated by at least one agent.
  void validate_cover() const {
    for (const auto& v : variables_)
      if (owners(v.id).empty())
        throw CoverageError("variable '" + v.name + "' is owned by no agent");
  }

 private:
  void check_id(VarId id) const {
    if (id < 0 || id >= num_variables()) throw LayoutError("unknown variable id");
  }

  std::vector<Variable> variables_;
  std::vector<std::vector<VarId>> agent_subsets_;
};

}  // namespace smdnet
