#pragma once

#include <cstdint>
#include <memory>

#include "dagmip/basis.hpp"
#include "dagmip/dataset.hpp"
#include "dagmip/sem.hpp"

namespace fixture {

// Additive cos-mix SEM on a random DAG, sampled and expanded.
struct Instance {
  dagmip::Dag truth;
  dagmip::Dataset data;
  dagmip::BasisSystem system;
  std::shared_ptr<const dagmip::GramMatrix> gram;
};

inline Instance make_instance(int p, std::uint64_t seed, int n = 300, dagmip::BasisConfig basis = {},
                              double edge_prob = 0.6, double sigma = 0.5) {
  Instance in;
  in.truth = dagmip::random_dag(p, edge_prob, 100 + seed);
  dagmip::SemSpec spec = dagmip::additive_model(in.truth, dagmip::EdgeFunction::parse("cos_mix"),
                                                std::vector<double>(p, sigma), 1);
  // Centering precision does not matter here; keep the reference sample small.
  dagmip::prepare_centering(spec, 20000);
  in.data = dagmip::sample(spec, n, 500 + seed).centered();
  in.system = dagmip::BasisSystem::fit(basis, in.data);
  in.gram = std::make_shared<const dagmip::GramMatrix>(dagmip::gram(in.system, in.data));
  return in;
}

inline dagmip::BasisConfig small_spline(int degree = 2, int knots = 2) {
  dagmip::BasisConfig c;
  c.degree = degree;
  c.knots = knots;
  return c;
}

}  // namespace fixture
