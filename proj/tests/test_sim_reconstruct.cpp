#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace tbqst;
using namespace tbqst::testing;

namespace {

const CascadeSpec kSpec4 = CascadeSpec::for_dimension(4);

MeasurementKey single_key(Detector det, int slot, double th1, double th2) {
  return {{Outcome{det, slot, PhaseSetting{{th2, th1}}}}};
}


}  // namespace

// --- expected and sampled counts -------------------------------------------------------

TEST(ExpectedCounts, WorkedExamples) {
  const auto els = povm_elements(kSpec4, PhaseSetting{{0.0, 0.0}}, TransmittanceSet::ideal(2));
  const double n = 1e4;
  Vector e0 = Vector::Zero(4);
  e0(0) = 1;
  const CountRecord zero = expected_counts(DensityOperator::from_pure(e0), els, n);
  EXPECT_NEAR(zero.entries.at(single_key(Detector::D1, 0, 0, 0)), n / 16, 1e-9);
  EXPECT_EQ(zero.mode, CountMode::single);
  EXPECT_EQ(zero.meta.photons, n);

  const CountRecord mixed = expected_counts(DensityOperator::maximally_mixed(4), els, n);
  EXPECT_NEAR(mixed.entries.at(single_key(Detector::D2, 2, 0, 0)), n / 8, 1e-9);

  Vector psi = Vector::Zero(4);
  psi(0) = psi(2) = 1 / std::sqrt(2.0);
  const CountRecord dark = expected_counts(DensityOperator::from_pure(psi), els, n);
  EXPECT_EQ(dark.entries.at(single_key(Detector::D2, 2, 0, 0)), 0.0);

  EXPECT_THROW(expected_counts(DensityOperator::maximally_mixed(3), els, n), ShapeError);
  EXPECT_THROW(expected_counts(DensityOperator::maximally_mixed(4), els, 0.0), DomainError);
}

TEST(ExpectedCounts, LinearInStateAndPhotons) {
  Gen gen(50);
  const auto els = single_set(measured_signal());
  const Matrix a = gen.density(4), b = gen.density(4);
  const double w = 0.3;
  const auto ra = expected_counts(DensityOperator(a), els, 100);
  const auto rb = expected_counts(DensityOperator(b), els, 100);
  const auto rm = expected_counts(DensityOperator(w * a + (1 - w) * b), els, 300);
  for (const auto& [k, v] : rm.entries) EXPECT_NEAR(v, 3 * (w * ra.entries.at(k) + (1 - w) * rb.entries.at(k)), 1e-9);
}

TEST(ExpectedCounts, ProbabilityConservation) {
  Gen gen(51);
  for (int t = 0; t < 5; ++t) {
    const DensityOperator rho(gen.density(4));
    const auto ideal = TransmittanceSet::ideal(2);
    for (const auto& s : canonical_settings(2)) {
      const double total = expected_counts(rho, povm_elements(kSpec4, s, ideal), 1000).total();
      const double lost = 1000 * naive_trace_product(terminated_completion(kSpec4, s, ideal), rho.matrix()).real();
      EXPECT_NEAR(total + lost, 1000, 1e-9);
    }
  }
}

TEST(ExpectedCoincidences, Examples) {
  const auto s = povm_elements(kSpec4, PhaseSetting{{0.0, 0.0}}, TransmittanceSet::ideal(2));
  const double n = 1e6;
  const CountRecord mes = expected_coincidences(mes_state(4, 0).density(), s, s, n);
  EXPECT_EQ(mes.mode, CountMode::coincidence);
  EXPECT_EQ(mes.entries.size(), 13u * 13u);
  const MeasurementKey t3{{s[3].key.parts[0], s[3].key.parts[0]}};
  EXPECT_NEAR(mes.entries.at(t3), n / 64, 1e-6);

  Vector e0 = Vector::Zero(16);
  e0(0) = 1;
  const CountRecord prod = expected_coincidences(DensityOperator::from_pure(e0), s, s, n);
  const MeasurementKey t0{{s[0].key.parts[0], s[0].key.parts[0]}};
  EXPECT_NEAR(prod.entries.at(t0), n / 256, 1e-9);
  EXPECT_THROW(expected_coincidences(DensityOperator::maximally_mixed(8), s, s, n), ShapeError);
}

TEST(ExpectedCoincidences, ProductStatesFactorize) {
  Gen gen(52);
  const auto s = single_set(measured_signal()), i = single_set(measured_idler());
  const Matrix a = gen.density(4), b = gen.density(4);
  const auto joint = expected_coincidences(DensityOperator(tensor(a, b)), s, i, 1.0);
  const auto sa = expected_counts(DensityOperator(a), s, 1.0), ib = expected_counts(DensityOperator(b), i, 1.0);
  for (const auto& [k, v] : joint.entries)
    EXPECT_NEAR(v, sa.entries.at({{k.parts[0]}}) * ib.entries.at({{k.parts[1]}}), 1e-14);
  EXPECT_EQ(joint.entries.size(), 52u * 52u);
}

TEST(SampleCounts, ZerosDeterminismAndTails) {
  CountRecord zeros;
  for (int l = 0; l < 5; ++l) zeros.entries[single_key(Detector::D1, l, 0, 0)] = 0;
  EXPECT_EQ(sample_counts(zeros, 1).total(), 0.0);

  CountRecord big;
  big.entries[single_key(Detector::D1, 0, 0, 0)] = 1e6;
  const CountRecord a = sample_counts(big, 99), b = sample_counts(big, 99);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.meta.seed, 99u);
  const double v = a.entries.begin()->second;
  EXPECT_EQ(v, std::round(v));
  EXPECT_LT(std::abs(v - 1e6), 5000);
}

TEST(SampleCounts, ClasswiseDeviationBound) {
  const auto els = single_set(measured_signal());
  const auto classes = build_classes(els).classes;
  const CountRecord exp = expected_counts(DensityOperator::maximally_mixed(4), els, 1e6);
  const RealVector ne = aggregate_counts(classes, exp);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const RealVector nm = aggregate_counts(classes, sample_counts(exp, seed));
    for (Eigen::Index j = 0; j < ne.size(); ++j) EXPECT_LE(std::abs(nm(j) - ne(j)), 5 * std::sqrt(ne(j)));
  }
}

TEST(SampleCounts, KeyDrawIndependentOfOtherKeys) {
  CountRecord one, two;
  const auto k = single_key(Detector::D2, 3, 0, 0);
  one.entries[k] = two.entries[k] = 500;
  two.entries[single_key(Detector::D1, 0, 0, 0)] = 700;
  EXPECT_EQ(sample_counts(one, 5).entries.at(k), sample_counts(two, 5).entries.at(k));
}

// --- calibration -------------------------------------------------------------------------

TEST(Calibration, IdealPeaksAndTransmittanceRatios) {
  const auto flat = simulate_calibration(kSpec4, TransmittanceSet::ideal(2), 4000, std::nullopt);
  ASSERT_EQ(flat.size(), 2u);
  EXPECT_EQ(flat[0].channel, 1);
  EXPECT_EQ(flat[0].detector, Detector::D1);
  for (double c : flat[0].counts) EXPECT_NEAR(c, 1000, 1e-9);

  const auto h = simulate_calibration(kSpec4, measured_idler(), 1e6, std::nullopt);
  const auto& s = h[0].counts;
  EXPECT_NEAR(s[1] / s[0], 0.9669, 1e-12);
  EXPECT_NEAR(s[2] / s[0], 0.8495, 1e-12);
  EXPECT_NEAR(s[3] / s[0], 0.9669 * 0.8495, 1e-12);
  EXPECT_NEAR(s[3] / s[0], 0.8214, 5e-5);
  const auto& y = h[1].counts;
  EXPECT_NEAR(y[2] / y[0], 0.8302, 1e-12);
  EXPECT_EQ(y[1], 0.0);
  EXPECT_EQ(y[3], 0.0);
}

TEST(Calibration, EstimatorArithmetic) {
  const std::vector<CalibrationHistogram> h = {{1, Detector::D1, {1000, 1063, 1009, 1072}},
                                               {2, Detector::D2, {1000, 0, 830, 0}}};
  const CalibrationEstimate e = estimate_transmittances(h);
  EXPECT_NEAR(e.eta_x[0], (1063.0 + 1072) / (1000 + 1009), 1e-15);
  EXPECT_NEAR(e.eta_x[1], (1009.0 + 1072) / (1000 + 1063), 1e-15);
  EXPECT_NEAR(e.eta_x[0], 1.0627, 5e-5);
  EXPECT_NEAR(e.eta_x[1], 1.0087, 5e-5);
  EXPECT_NEAR(e.eta_y_first, 0.83, 1e-15);
  const TransmittanceSet set = e.to_set(0.5);
  EXPECT_EQ(set.y[0], 1.0);
  EXPECT_EQ(set.d1, 0.5);
}

TEST(Calibration, NoiselessInverseAndErrors) {
  const TransmittanceSet truth = measured_signal();
  const TransmittanceSet est = estimate_transmittances(simulate_calibration(kSpec4, truth, 1e6, std::nullopt)).to_set(truth.d1);
  EXPECT_NEAR(est.x[0], truth.x[0], 1e-12);
  EXPECT_NEAR(est.x[1], truth.x[1], 1e-12);
  EXPECT_NEAR(est.y[1], truth.y[1], 1e-12);

  EXPECT_THROW(estimate_transmittances({{1, Detector::D1, {0, 1, 0, 1}}, {2, Detector::D2, {1, 0, 1, 0}}}), CalibrationDataError);
  EXPECT_THROW(estimate_transmittances({{1, Detector::D1, {1, 1, 1, 1}}, {2, Detector::D2, {0, 0, 1, 0}}}), CalibrationDataError);
  EXPECT_THROW(estimate_transmittances({{1, Detector::D1, {1, 1, 1, 1}}}), CalibrationDataError);
}

TEST(Calibration, GeneralDepthRecovery) {
  const CascadeSpec spec = CascadeSpec::for_dimension(8);
  const TransmittanceSet truth{{0.9, 1.1, 0.95}, {1.0, 1.0, 0.85}, 1.0};
  const auto e = estimate_transmittances(simulate_calibration(spec, truth, 1e6, std::nullopt));
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(e.eta_x[static_cast<std::size_t>(i)], truth.x[static_cast<std::size_t>(i)], 1e-12);
  EXPECT_NEAR(e.eta_y_first, 0.85, 1e-12);
}

TEST(Calibration, PoissonWithinOnePercent) {
  const TransmittanceSet truth = measured_idler();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto e = estimate_transmittances(simulate_calibration(kSpec4, truth, 1e6, seed));
    EXPECT_NEAR(e.eta_x[0] / truth.x[0], 1.0, 0.01);
    EXPECT_NEAR(e.eta_x[1] / truth.x[1], 1.0, 0.01);
    EXPECT_NEAR(e.eta_y_first / truth.y[1], 1.0, 0.01);
  }
}

TEST(DetectorRatio, Conventions) {
  const auto ideal = TransmittanceSet::ideal(2);
  const auto [a1, a2] = detector_acceptance(DensityOperator::maximally_mixed(4), povm_elements(kSpec4, PhaseSetting{{0.0, 0.0}}, ideal));
  EXPECT_NEAR(estimate_detector_ratio(a1, a2, kSpec4), 1.0, 1e-12);
  EXPECT_NEAR(estimate_detector_ratio(17.1, 72.4, kSpec4), 0.474, 2e-3);
  EXPECT_EQ(estimate_detector_ratio(34.2, 144.8, kSpec4), estimate_detector_ratio(17.1, 72.4, kSpec4));
  EXPECT_THROW(estimate_detector_ratio(0.0, 1.0, kSpec4), CalibrationDataError);
}

// --- triangular factor and likelihood --------------------------------------------------------

TEST(TriangularFactor, RoundTripAndPhysicality) {
  Gen gen(60);
  for (int t = 0; t < 10; ++t) {
    const int d = gen.integer(1, 6);
    RealVector p(d * d);
    for (int i = 0; i < d * d; ++i) p(i) = gen.normal();
    const TriangularFactor f{d, p};
    const Matrix r = f.to_matrix();
    for (int row = 0; row < d; ++row)
      for (int col = row + 1; col < d; ++col) EXPECT_EQ(r(row, col), cd(0));
    EXPECT_EQ(TriangularFactor::from_matrix(r).params, p);
    const Matrix g = f.gram();
    EXPECT_LT(max_diff(g, r.adjoint() * r), 1e-14);
    const Matrix rho = g / g.trace().real();
    EXPECT_LT(hermiticity_error(rho), 1e-14);
    EXPECT_GT(eig_hermitian(hermitian_part(rho)).values.minCoeff(), -1e-12);
  }
}

TEST(TriangularFactor, FactorizeReproducesGram) {
  Gen gen(61);
  for (int t = 0; t < 10; ++t) {
    const int d = gen.integer(1, 6);
    const Matrix a = 1000 * gen.density(d);
    EXPECT_LT(max_diff(TriangularFactor::factorize(a).gram(), a), 1e-9);
  }
}

TEST(Likelihood, PlugInValues) {
  const std::vector<Matrix> one{identity(1)};
  RealVector m(1);
  m(0) = 100;
  const LikelihoodModel model(one, m);
  RealVector p(1);
  p(0) = 10;  // N = 100
  EXPECT_NEAR(model.value(p), std::log(100.0), 1e-14);

  Gen gen(62);
  const auto els = single_set(measured_signal());
  const auto ops = class_operators(build_classes(els).classes);
  const TriangularFactor r = TriangularFactor::factorize(5000 * gen.density(4));
  const LikelihoodModel plain(ops, RealVector::Ones(static_cast<Eigen::Index>(ops.size())));
  const RealVector n = plain.expected(r.gram());
  const LikelihoodModel exact(ops, n);
  EXPECT_NEAR(exact.value(r), n.array().log().sum(), 1e-9);
}

TEST(Likelihood, ScalingAndGaugeInvariance) {
  Gen gen(63);
  const auto ops = class_operators(build_classes(single_set()).classes);
  RealVector m(static_cast<Eigen::Index>(ops.size()));
  for (Eigen::Index j = 0; j < m.size(); ++j) m(j) = gen.integer(0, 500);
  const LikelihoodModel model(ops, m);
  const TriangularFactor r = TriangularFactor::factorize(3000 * gen.density(4));

  const TriangularFactor doubled{4, 2 * r.params};
  EXPECT_NEAR(doubled.gram().trace().real(), 4 * r.gram().trace().real(), 1e-6);
  EXPECT_LT(max_diff(doubled.gram() / doubled.gram().trace(), r.gram() / r.gram().trace()), 1e-14);
  // n doubles by 4 so L changes; compare against direct evaluation.
  const RealVector n4 = 4 * model.expected(r.gram());
  EXPECT_NEAR(model.value(doubled), model.value_from_expected(n4), 1e-8);

  const Matrix phased = std::polar(1.0, 0.7) * r.to_matrix();
  EXPECT_NEAR(model.value_from_expected(model.expected(phased.adjoint() * phased)), model.value(r), 1e-9);
}

TEST(Likelihood, GradientMatchesFiniteDifferences) {
  Gen gen(64);
  const auto ops = class_operators(build_classes(single_set(measured_idler())).classes);
  for (int t = 0; t < 20; ++t) {
    RealVector m(static_cast<Eigen::Index>(ops.size()));
    for (Eigen::Index j = 0; j < m.size(); ++j) m(j) = gen.integer(0, 300);
    const LikelihoodModel model(ops, m);
    const TriangularFactor r = TriangularFactor::factorize(gen.uniform(500, 5000) * gen.density(4));
    RealVector g;
    model.value_and_gradient(r.params, g);
    const RealVector fd = numeric_gradient([&](const RealVector& x) { return model.value(x); }, r.params, 1e-5);
    EXPECT_LT((g - fd).cwiseAbs().maxCoeff(), 1e-5 * std::max(1.0, fd.cwiseAbs().maxCoeff()));
  }
}

TEST(Likelihood, FloorKeepsValueFinite) {
  const std::vector<Matrix> ops{identity(2) / 2.0, Matrix::Zero(2, 2)};
  RealVector m(2);
  m << 10, 3;
  const LikelihoodModel model(ops, m);
  RealVector p(4);
  p << 3, 3, 0, 0;
  RealVector g;
  EXPECT_TRUE(std::isfinite(model.value_and_gradient(p, g)));
  EXPECT_TRUE(g.allFinite());
}

// --- reconstruction -----------------------------------------------------------------------------

TEST(LinearInversion, NoiselessRecovery) {
  Gen gen(70);
  const auto els = single_set(measured_signal());
  const auto classes = build_classes(els).classes;
  const GellMannBasis basis = build_basis(4);
  const auto mm = linear_inversion(aggregate_counts(classes, expected_counts(DensityOperator::maximally_mixed(4), els, 1e5)), classes, basis);
  EXPECT_NEAR(mm.photons / 1e5, 1.0, 1e-6);
  EXPECT_LT(decompose_operator(mm.rho, basis).tail(15).cwiseAbs().maxCoeff(), 1e-8);
  for (int t = 0; t < 10; ++t) {
    const DensityOperator rho = DensityOperator::from_pure(gen.pure(4));
    const auto res = linear_inversion(aggregate_counts(classes, expected_counts(rho, els, 1e5)), classes, basis);
    EXPECT_LT(max_diff(res.rho, rho.matrix()), 1e-8);
    EXPECT_EQ(res.method, Method::linear);
  }
}

TEST(LinearInversion, PoissonNoiseBreaksPositivity) {
  Gen gen(71);
  const auto els = single_set();
  const auto classes = build_classes(els).classes;
  const GellMannBasis basis = build_basis(4);
  const DensityOperator rho = DensityOperator::from_pure(gen.pure(4));
  const auto exp = expected_counts(rho, els, 200);
  int unphysical = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    unphysical += !linear_inversion(aggregate_counts(classes, sample_counts(exp, seed)), classes, basis).physical;
  EXPECT_GT(unphysical, 0);
}

TEST(LinearInversion, RankDeficientThrows) {
  const auto els = povm_elements(kSpec4, PhaseSetting{{0.0, 0.0}}, TransmittanceSet::ideal(2));
  const auto classes = build_classes(els).classes;
  const RealVector n = RealVector::Ones(static_cast<Eigen::Index>(classes.size()));
  EXPECT_THROW(linear_inversion(n, classes, build_basis(4)), UnderdeterminedError);
}

TEST(Mle, NoiselessSingleQudit) {
  Gen gen(72);
  const auto els = single_set(measured_signal());
  const auto classes = build_classes(els).classes;
  const auto mm = mle_reconstruct(aggregate_counts(classes, expected_counts(DensityOperator::maximally_mixed(4), els, 1e5)), classes);
  EXPECT_LT(max_diff(mm.rho, identity(4) / 4.0), 1e-4);
  for (int t = 0; t < 5; ++t) {
    const DensityOperator rho(gen.density(4, gen.integer(0, 4)));
    const auto res = mle_reconstruct(aggregate_counts(classes, expected_counts(rho, els, 1e6)), classes);
    EXPECT_TRUE(res.physical);
    EXPECT_LT(infidelity(res.rho, rho), 1e-4);
    EXPECT_NEAR(res.rho.trace().real(), 1.0, 1e-10);
    EXPECT_GT(min_eigenvalue(res.rho), -1e-10);
  }
}

TEST(Mle, NoiselessTwoQuditMes) {
  const auto s = single_set(measured_signal()), i = single_set(measured_idler());
  const auto joint = joint_elements(s, i);
  const auto classes = build_classes(joint).classes;
  const DensityOperator mes = mes_state(4, 0).density();
  const auto res = mle_reconstruct(aggregate_counts(classes, expected_counts(mes, joint, 1e6)), classes);
  EXPECT_GE(fidelity(DensityOperator::normalized(res.rho), mes), 0.9999);
}

TEST(Mle, PhysicalForArbitraryCounts) {
  Gen gen(73);
  const auto classes = build_classes(single_set()).classes;
  for (int t = 0; t < 10; ++t) {
    RealVector m(static_cast<Eigen::Index>(classes.size()));
    for (Eigen::Index j = 0; j < m.size(); ++j) m(j) = gen.uniform() < 0.3 ? 0 : gen.integer(0, 1000);
    if (m.sum() == 0) m(0) = 1;
    const auto res = mle_reconstruct(m, classes);
    EXPECT_GT(min_eigenvalue(res.rho), -1e-10);
    EXPECT_NEAR(res.rho.trace().real(), 1.0, 1e-10);
    EXPECT_LT(hermiticity_error(res.rho), 1e-12);
  }
}

TEST(Mle, OptimumHasSmallGradient) {
  Gen gen(74);
  const auto els = single_set(measured_signal());
  const auto classes = build_classes(els).classes;
  const auto ops = class_operators(classes);
  const RealVector m = aggregate_counts(classes, sample_counts(expected_counts(DensityOperator(gen.density(4)), els, 1e5), 3));
  const auto res = mle_reconstruct(m, classes);
  ASSERT_TRUE(res.factor.has_value());
  const LikelihoodModel model(ops, m);
  EXPECT_NEAR(model.value(*res.factor), res.likelihood, 1e-9 * std::abs(res.likelihood));
  const RealVector fd = numeric_gradient([&](const RealVector& x) { return model.value(x); }, res.factor->params, 1e-4);
  EXPECT_LE(fd.norm(), 1e-3 * (1 + std::abs(res.likelihood)));
}

TEST(Mle, DeterministicAndWarmStartIndependent) {
  Gen gen(75);
  const auto els = single_set();
  const auto classes = build_classes(els).classes;
  const RealVector m = aggregate_counts(classes, sample_counts(expected_counts(DensityOperator(gen.density(4)), els, 1e5), 4));
  const auto a = mle_reconstruct(m, classes), b = mle_reconstruct(m, classes);
  EXPECT_EQ(a.rho, b.rho);
  const auto c = mle_reconstruct(m, classes, TriangularFactor::factorize(m.sum() / 4.0 * identity(4) / 4.0));
  EXPECT_NEAR(c.likelihood, a.likelihood, 1e-6 * std::abs(a.likelihood));
  EXPECT_LT(max_diff(c.rho, a.rho), 1e-4);
}

TEST(Mle, DegenerateInputs) {
  const auto classes = build_classes(single_set()).classes;
  const auto res = mle_reconstruct(RealVector::Zero(static_cast<Eigen::Index>(classes.size())), classes);
  EXPECT_FALSE(res.converged);
  EXPECT_EQ(res.rho, identity(4) / 4.0);

  const auto few = build_classes(povm_elements(kSpec4, PhaseSetting{{0.0, 0.0}}, TransmittanceSet::ideal(2))).classes;
  ASSERT_LT(few.size(), 16u);
  EXPECT_THROW(mle_reconstruct(RealVector::Ones(static_cast<Eigen::Index>(few.size())), few), UnderdeterminedError);
}

TEST(Mle, JointAggregationCommutes) {
  Gen gen(76);
  const auto s = single_set(measured_signal()), i = single_set(measured_idler());
  const auto joint = joint_elements(s, i);
  const auto classes = build_classes(joint).classes;
  const CountRecord raw = sample_counts(expected_coincidences(DensityOperator(gen.density(16)), s, i, 1e5), 8);
  const RealVector n = aggregate_counts(classes, raw);
  EXPECT_EQ(n.sum(), raw.total());
  for (std::size_t j = 0; j < classes.size(); ++j) {
    double sum = 0;
    for (const auto& k : classes[j].members) sum += raw.entries.at(k);
    EXPECT_EQ(n(static_cast<Eigen::Index>(j)), sum);
  }
}
