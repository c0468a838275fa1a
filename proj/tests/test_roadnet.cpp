#include "grideta/roadnet.hpp"

#include <random>
#include <sstream>

#include "doctest.h"

using namespace grideta;
using namespace grideta::roadnet;
using geo::CellIndex;

namespace {

std::vector<std::vector<CellIndex>> paper_paths() {
  // c1..c7 laid out as distinct cells
  const CellIndex c1{1, 1}, c2{2, 2}, c3{1, 2}, c4{3, 2}, c5{5, 5}, c6{2, 1}, c7{2, 3};
  return {{c1, c3, c2, c4}, {c5, c6, c2, c7}};
}

}  // namespace

TEST_CASE("upstream cells follow trajectory steps") {
  RoadGraph graph = build_road_graph(paper_paths());
  CHECK(graph.vertices.size() == 7);

  const auto up = graph.upstream_of(CellIndex{2, 2});  // c2
  REQUIRE(up.size() == 2);
  // sorted vertex order: (1,2) = c3 then (2,1) = c6
  CHECK(up[0] == CellIndex{1, 2});
  CHECK(up[1] == CellIndex{2, 1});

  // no self loops, no spurious edges
  for (int i = 0; i < graph.adjacency.rows(); ++i) CHECK(graph.adjacency(i, i) == 0.0);

  CHECK(build_road_graph({{CellIndex{4, 4}}}).adjacency.sum() == 0.0);

  RoadGraph loop = build_road_graph({{CellIndex{1, 1}, CellIndex{1, 2}, CellIndex{1, 1}}});
  CHECK(loop.adjacency.sum() == 2.0);
  CHECK(loop.adjacency(0, 0) == 0.0);
  CHECK(loop.adjacency(1, 1) == 0.0);
}

TEST_CASE("adjacency rebuild is bit-identical") {
  RoadGraph a = build_road_graph(paper_paths());
  RoadGraph b = build_road_graph(paper_paths());
  CHECK(a.adjacency == b.adjacency);
  CHECK(a.vertices == b.vertices);

  std::ostringstream ea, eb;
  write_edge_list(a, ea);
  write_edge_list(b, eb);
  CHECK(ea.str() == eb.str());
  CHECK(ea.str().find("1,2 -> 2,2") != std::string::npos);
}

TEST_CASE("sdne_forward ranges and determinism") {
  SdneConfig cfg;
  cfg.embed_dim = 4;
  cfg.hidden_widths = {6};
  cfg.seed = 3;
  SdneModel model = make_sdne_model(10, cfg);

  // zero parameters: every sigmoid unit reports 0.5
  SdneModel zeros = model;
  for (auto* net : {&zeros.encoder, &zeros.decoder})
    for (auto& layer : net->layers) {
      layer.weight.setZero();
      layer.bias.setZero();
    }
  auto [omega0, recon0] = sdne_forward(Eigen::VectorXd::Zero(10), zeros);
  CHECK(omega0.size() == 4);
  CHECK((omega0.array() == 0.5).all());
  CHECK((recon0.array() == 0.5).all());

  std::mt19937_64 rng(8);
  Eigen::VectorXd row(10);
  for (int i = 0; i < 10; ++i) row(i) = rng() % 2;
  auto [o1, r1] = sdne_forward(row, model);
  auto [o2, r2] = sdne_forward(row, model);
  CHECK(o1 == o2);
  CHECK(r1 == r2);
  CHECK((r1.array() > 0.0).all());
  CHECK((r1.array() < 1.0).all());

  CHECK_THROWS_AS(sdne_forward(Eigen::VectorXd::Zero(9), model), Error);
}

TEST_CASE("sdne_loss composition and gamma behavior") {
  SdneConfig cfg;
  cfg.embed_dim = 3;
  cfg.hidden_widths = {5};
  cfg.seed = 11;

  // 4 vertices, one edge 0 -> 1
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(4, 4);
  adj(0, 1) = 1.0;
  SdneModel model = make_sdne_model(4, cfg);

  std::vector<int> all{0, 1, 2, 3};
  SdneLoss loss = sdne_loss(all, model, adj, cfg);
  CHECK(loss.value == doctest::Approx(loss.first_order + loss.reconstruction +
                                      loss.regularization));
  CHECK(loss.first_order > 0.0);

  SdneConfig no_gamma = cfg;
  no_gamma.gamma = 0.0;
  SdneLoss without = sdne_loss(all, model, adj, no_gamma);
  CHECK(without.first_order == 0.0);
  CHECK(without.value ==
        doctest::Approx(without.reconstruction + without.regularization));
  // reconstruction and regularization do not depend on gamma
  CHECK(without.reconstruction == doctest::Approx(loss.reconstruction));
  CHECK(without.regularization == doctest::Approx(loss.regularization));
}

TEST_CASE("sdne gradients match finite differences on a 6-vertex graph") {
  SdneConfig cfg;
  cfg.embed_dim = 3;
  cfg.hidden_widths = {5};
  cfg.gamma = 1.3;
  cfg.xi = 5.0;
  cfg.nu = 1e-3;
  cfg.seed = 17;

  // directed 6-cycle plus one chord
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(6, 6);
  for (int i = 0; i < 6; ++i) adj(i, (i + 1) % 6) = 1.0;
  adj(2, 5) = 1.0;

  SdneModel model = make_sdne_model(6, cfg);
  std::vector<int> all{0, 1, 2, 3, 4, 5};
  SdneLoss loss = sdne_loss(all, model, adj, cfg);

  auto loss_value = [&]() { return sdne_loss(all, model, adj, cfg).value; };
  const double worst = nn::finite_diff_check(
      {&model.encoder, &model.decoder}, loss_value,
      {&loss.encoder_grads, &loss.decoder_grads}, 1e-5);
  CHECK(worst < 1e-4);
}

TEST_CASE("train_sdne separates neighbors from strangers") {
  // directed 6-cycle
  std::vector<std::vector<CellIndex>> paths;
  std::vector<CellIndex> cycle;
  for (int i = 0; i < 6; ++i) cycle.push_back(CellIndex{1 + i, 1});
  cycle.push_back(CellIndex{1, 1});
  paths.push_back(cycle);
  RoadGraph graph = build_road_graph(paths);

  SdneConfig cfg;
  cfg.embed_dim = 4;
  cfg.hidden_widths = {8};
  cfg.epochs = 120;
  cfg.learning_rate = 0.01;
  cfg.seed = 23;
  SdneResult result = train_sdne(graph, cfg);

  CHECK(result.loss_history.size() == 120);
  CHECK(result.loss_history[49] <= result.loss_history[0]);

  double edge_dist = 0.0, non_edge_dist = 0.0;
  int edges = 0, non_edges = 0;
  for (std::size_t i = 0; i < graph.vertices.size(); ++i) {
    for (std::size_t j = 0; j < graph.vertices.size(); ++j) {
      if (i == j) continue;
      const double d = (result.embedding.at(graph.vertices[i]) -
                        result.embedding.at(graph.vertices[j]))
                           .norm();
      if (graph.adjacency(i, j) != 0.0) {
        edge_dist += d;
        ++edges;
      } else {
        non_edge_dist += d;
        ++non_edges;
      }
    }
  }
  CHECK(edge_dist / edges < non_edge_dist / non_edges);

  // unseen cells map to the zero vector
  CHECK(result.embedding.at(CellIndex{99, 99}).norm() == 0.0);

  RoadGraph tiny = build_road_graph({{CellIndex{1, 1}}});
  CHECK_THROWS_AS(train_sdne(tiny, cfg), Error);
}

TEST_CASE("identical neighborhood rows embed identically") {
  // two sources feeding the same pair of sinks have equal NS rows
  const CellIndex a{1, 1}, b{1, 2}, s1{2, 1}, s2{2, 2};
  RoadGraph graph = build_road_graph({{a, s1}, {a, s2}, {b, s1}, {b, s2}});

  SdneConfig cfg;
  cfg.embed_dim = 3;
  cfg.hidden_widths = {6};
  cfg.epochs = 40;
  cfg.seed = 29;
  SdneResult result = train_sdne(graph, cfg);

  const int ia = graph.vertex_index(a);
  const int ib = graph.vertex_index(b);
  CHECK(graph.adjacency.row(ia) == graph.adjacency.row(ib));
  CHECK((result.embedding.at(a) - result.embedding.at(b)).norm() == 0.0);
}
