#include <doctest.h>

#include <cmath>

#include "mfnet/dnn.hpp"
#include "mfnet/errors.hpp"
#include "oracles.hpp"

using namespace mfnet;

namespace {

// d = N = 1, two hidden layers of width one, every weight equal to one.
DnnNet scalar_chain() {
    DnnNet net = DnnNet::zeros(1, {1, 1}, Activation::tanh());
    for (auto& W : net.W) W.setOnes();
    return net;
}

Dataset scalar_data(double y = 0.0) {
    return oracle::dataset(Matrix::Ones(1, 1), Vector::Constant(1, y));
}

} // namespace

TEST_CASE("zero weights give zero features and output") {
    const Dataset data = oracle::random_dataset(4, 3, 1);
    const FeatureCache c = dnn_forward(DnnNet::zeros(3, {5, 6}, Activation::tanh()), data);
    for (std::size_t l = 1; l < c.theta.size(); ++l) CHECK(oracle::inf_norm(c.theta[l]) == 0.0);
    CHECK(c.output.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scalar chain forward") {
    const FeatureCache c = dnn_forward(scalar_chain(), scalar_data());
    CHECK(c.theta[1](0, 0) == 1.0);
    CHECK(c.theta[2](0, 0) == doctest::Approx(std::tanh(1.0)).epsilon(1e-15));
    CHECK(c.output(0) == doctest::Approx(std::tanh(std::tanh(1.0))).epsilon(1e-15));
}

TEST_CASE("forward pass matches a per-sample loop") {
    const Dataset data = oracle::random_dataset(4, 3, 2);
    const DnnNet net = oracle::random_dnn(3, {6, 6, 6}, 3);
    const FeatureCache c = dnn_forward(net, data);
    const oracle::DnnForward ref = oracle::dnn_forward_loop(net, data.X);
    for (std::size_t l = 1; l < ref.theta.size(); ++l) CHECK(oracle::inf_norm(c.theta[l] - ref.theta[l]) < 1e-12);
    CHECK(oracle::inf_norm(c.output - ref.output) < 1e-12);
}

TEST_CASE("loss examples") {
    FeatureCache c;
    c.output = Vector(2);
    c.output << 1.0, 3.0;
    CHECK(dnn_loss(c, c.output, Loss::pseudo_huber()) == 0.0);
    CHECK(dnn_loss(c, Vector::Zero(2), Loss::squared()) == 5.0);

    const Dataset data = oracle::random_dataset(5, 2, 4);
    const DnnNet net = oracle::random_dnn(2, {4}, 5);
    const FeatureCache r = dnn_forward(net, data);
    CHECK(dnn_loss(r, data.y, Loss::pseudo_huber()) ==
          doctest::Approx(oracle::mean_loss(r.output, data.y, Loss::pseudo_huber())).epsilon(1e-14));
}

TEST_CASE("gradients vanish when the labels are fitted") {
    Dataset data = oracle::random_dataset(4, 3, 6);
    const DnnNet net = oracle::random_dnn(3, {6, 6}, 7);
    data.y = dnn_forward(net, data).output;
    const DnnBackward back = dnn_backward(net, dnn_forward(net, data), data.y, Loss::pseudo_huber());
    for (const auto& G : back.grads.G) CHECK(oracle::inf_norm(G) < 1e-12);
}

TEST_CASE("scalar chain gradients match the hand chain rule") {
    const DnnNet net = scalar_chain();
    const Dataset data = scalar_data(0.0);
    const FeatureCache c = dnn_forward(net, data);
    const DnnBackward back = dnn_backward(net, c, data.y, Loss::squared());
    const double t1 = std::tanh(1.0);
    const double t2 = std::tanh(t1);
    const double dout = 2.0 * t2;
    CHECK(back.grads.G[2](0, 0) == doctest::Approx(dout * t2).epsilon(1e-12));
    const double d2 = dout * (1.0 - t2 * t2);
    CHECK(back.grads.G[1](0, 0) == doctest::Approx(d2 * t1).epsilon(1e-12));
    const double d1 = d2 * (1.0 - t1 * t1);
    CHECK(back.grads.G[0](0, 0) == doctest::Approx(d1).epsilon(1e-12));
}

TEST_CASE("gradients agree with central differences") {
    const Dataset data = oracle::random_dataset(4, 3, 8);
    for (const auto& loss : {Loss::pseudo_huber(), Loss::squared(), Loss::logistic()}) {
        const auto check = oracle::dnn_gradient_check(oracle::random_dnn(3, {6, 5, 6}, 9), data, loss, 50, 10);
        CAPTURE(loss.id());
        CHECK(check.max_rel_error < 1e-5);
    }
}

TEST_CASE("scaled step arithmetic") {
    const DnnNet net = oracle::random_dnn(3, {4, 4}, 11);
    DnnGrads zero;
    for (const auto& W : net.W) zero.G.push_back(Matrix::Zero(W.rows(), W.cols()));
    CHECK(scaled_gd_step(net, zero, 0.3).W == net.W);

    DnnGrads g = zero;
    for (auto& G : g.G) G.setOnes();
    CHECK(scaled_gd_step(net, g, 0.0).W == net.W);

    DnnNet one = DnnNet::zeros(1, {1}, Activation::tanh());
    one.W[1](0, 0) = 1.0;
    DnnGrads single{{Matrix::Zero(1, 1), Matrix::Constant(1, 1, 2.0)}};
    CHECK(scaled_gd_step(one, single, 0.1).W[1](0, 0) == doctest::Approx(0.8).epsilon(1e-15));

    // The step multiplies by the fan-in and fan-out of each layer.
    const DnnNet stepped = scaled_gd_step(net, g, 0.01);
    CHECK(stepped.W[1](0, 0) == doctest::Approx(net.W[1](0, 0) - 0.01 * 16).epsilon(1e-14));
    CHECK(stepped.W[0](0, 0) == doctest::Approx(net.W[0](0, 0) - 0.01 * 12).epsilon(1e-14));
    CHECK(stepped.W[2](0, 0) == doctest::Approx(net.W[2](0, 0) - 0.01 * 4).epsilon(1e-14));

    DnnGrads wrong = zero;
    wrong.G.pop_back();
    CHECK_THROWS_AS(scaled_gd_step(net, wrong, 0.1), ShapeMismatch);
}

TEST_CASE("training for zero steps leaves the net alone") {
    const Dataset data = oracle::random_dataset(4, 3, 12);
    const DnnNet net = oracle::random_dnn(3, {6, 6}, 13);
    const DnnTrainResult r = train_dnn(net, data, Loss::pseudo_huber(), 0.1, 0);
    CHECK(r.net.W == net.W);
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].step == 0);
}

TEST_CASE("one training step composes forward, backward and step") {
    const Dataset data = oracle::random_dataset(4, 3, 14);
    const DnnNet net = oracle::random_dnn(3, {6, 6}, 15);
    const Loss loss = Loss::pseudo_huber();
    const DnnTrainResult r = train_dnn(net, data, loss, 0.05, 1);
    const DnnNet manual = scaled_gd_step(net, dnn_backward(net, dnn_forward(net, data), data.y, loss).grads, 0.05);
    CHECK(r.net.W == manual.W);
    REQUIRE(r.records.size() == 2);
    CHECK(r.records[1].step == 1);
    CHECK(r.records[1].t == doctest::Approx(0.05));
    CHECK(r.records[1].loss == dnn_loss(dnn_forward(manual, data), data.y, loss));
}

TEST_CASE("training loss decreases on a small problem") {
    const Dataset data = oracle::random_dataset(4, 3, 16);
    const DnnTrainResult r = train_dnn(oracle::random_dnn(3, {8, 8}, 17), data, Loss::pseudo_huber(), 0.01, 100);
    CHECK(r.records.back().loss < r.records.front().loss);
    for (std::size_t k = 1; k < r.records.size(); ++k) CHECK(r.records[k].step > r.records[k - 1].step);
}

TEST_CASE("recording cadence") {
    CHECK(default_cadence(0) == 1);
    CHECK(default_cadence(1000) == 1);
    CHECK(default_cadence(1001) == 2);
    CHECK(default_cadence(2000) == 2);
    CHECK(default_cadence(10000) == 10);
    const Dataset data = oracle::random_dataset(3, 2, 18);
    TrainOptions every_third;
    every_third.cadence = 3;
    const auto r = train_dnn(oracle::random_dnn(2, {3}, 19), data, Loss::squared(), 0.01, 7, every_third);
    std::vector<std::size_t> steps;
    for (const auto& rec : r.records) steps.push_back(rec.step);
    CHECK(steps == std::vector<std::size_t>{0, 3, 6, 7});
}

TEST_CASE("feature spread examples") {
    Matrix same(3, 4);
    same.colwise() = Vector::LinSpaced(3, -1, 1);
    CHECK(column_spread(same) == 0.0);

    Matrix two(2, 2);
    two << 0, 1, 0, 3;
    CHECK(column_spread(two) == 3.0);

    const Matrix F = oracle::random_matrix(5, 64, 20);
    double naive = 0.0;
    for (Index a = 0; a < 64; ++a)
        for (Index b = 0; b < 64; ++b) naive = std::max(naive, (F.col(a) - F.col(b)).cwiseAbs().maxCoeff());
    CHECK(column_spread(F) == doctest::Approx(naive).epsilon(1e-15));

    CHECK_THROWS_AS(column_spread(Matrix::Ones(3, 1)), DegenerateWidth);
}

TEST_CASE("non-finite losses stop training") {
    Dataset data = oracle::random_dataset(3, 2, 21);
    DnnNet net = oracle::random_dnn(2, {3}, 22);
    CHECK_THROWS_AS(train_dnn(net, data, Loss::squared(), 1e6, 50), NonFiniteLoss);
}

TEST_CASE("networks with inconsistent shapes are rejected") {
    DnnNet net = oracle::random_dnn(3, {4, 4}, 23);
    net.W[1] = Matrix::Ones(3, 4);
    CHECK_THROWS(net.validate());
    const Dataset data = oracle::random_dataset(2, 5, 24);
    CHECK_THROWS_AS(dnn_forward(oracle::random_dnn(3, {4}, 25), data), ShapeMismatch);
}
