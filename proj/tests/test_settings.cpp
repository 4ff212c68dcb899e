#include <gtest/gtest.h>

#include <fstream>

#include "support.hpp"
#include "vfss/error.hpp"
#include "vfss/settings.hpp"

using namespace vfss;

TEST(Settings, DefaultsFollowTheTrainingRecipe) {
  const Settings s = Settings::defaults();
  const TrainConfig c = s.train_config();
  EXPECT_EQ(c.epochs, 100);
  EXPECT_EQ(c.batch_size, 8);
  EXPECT_DOUBLE_EQ(c.initial_lr, 1e-3);
  EXPECT_EQ(c.lr_decay_period, 5);
  EXPECT_DOUBLE_EQ(c.lr_decay_factor, 0.9);
  EXPECT_FALSE(c.class_balance);
  EXPECT_EQ(s.get_int("p3_tolerance"), 3);
  EXPECT_EQ(s.iou_thresholds().size(), 11u);
  EXPECT_EQ(s.refine_config().gac_iterations, 100);
}

TEST(Settings, PrecedenceFileEnvCli) {
  test::ScratchDir dir("settings");
  std::ofstream(dir / "c.cfg") << "# comment\nepochs = 7\nseed=3   # trailing\nk_darkest=50\n";
  Settings s = Settings::defaults();
  s.apply_file(dir / "c.cfg");
  EXPECT_EQ(s.get_int("epochs"), 7);
  EXPECT_EQ(s.source("epochs"), SettingSource::file);
  s.apply_env({{"VFSS_EPOCHS", "9"}, {"VFSS_K_DARKEST", "60"}, {"OTHER", "1"}});
  EXPECT_EQ(s.get_int("epochs"), 9);
  EXPECT_EQ(s.source("k_darkest"), SettingSource::env);
  s.set("epochs", "11", SettingSource::cli);
  EXPECT_EQ(s.get_int("epochs"), 11);
  EXPECT_EQ(s.get_u64("seed"), 3u);
  EXPECT_EQ(s.source("seed"), SettingSource::file);
  EXPECT_EQ(s.refine_config().k_darkest, 60);
}

TEST(Settings, UnknownKeysAreRejected) {
  test::ScratchDir dir("settings_bad");
  std::ofstream(dir / "c.cfg") << "epochz=7\n";
  Settings s = Settings::defaults();
  EXPECT_THROW(s.apply_file(dir / "c.cfg"), DataError);
  EXPECT_THROW(s.set("nope", "1", SettingSource::cli), UsageError);
  EXPECT_THROW(s.apply_file(dir / "missing.cfg"), DataError);
}

TEST(Settings, TypedGettersValidate) {
  Settings s = Settings::defaults();
  s.set("seed", "-4", SettingSource::cli);
  EXPECT_THROW(s.get_u64("seed"), UsageError);
  s.set("overlays", "off", SettingSource::cli);
  EXPECT_FALSE(s.get_bool("overlays"));
  s.set("overlays", "maybe", SettingSource::cli);
  EXPECT_THROW(s.get_bool("overlays"), UsageError);
  s.set("arch", "vgg16", SettingSource::cli);
  EXPECT_THROW(s.cnn_spec(), UsageError);
  s.set("balloon", "sideways", SettingSource::cli);
  EXPECT_THROW(s.refine_config(), UsageError);
}

TEST(Settings, CamPositiveFractionGate) {
  Settings s = Settings::defaults();
  EXPECT_EQ(s.refine_config().min_positive_fraction, 0.5);
  s.set("cam_min_positive_fraction", "0", SettingSource::cli);
  EXPECT_EQ(s.refine_config().min_positive_fraction, 0.0);
  s.set("cam_min_positive_fraction", "1.5", SettingSource::cli);
  EXPECT_THROW(s.refine_config(), DataError);
}

TEST(Settings, SnapshotListsEveryKeyWithSource) {
  Settings s = Settings::defaults();
  s.set("seed", "42", SettingSource::cli);
  const std::string snap = s.snapshot();
  EXPECT_NE(snap.find("seed=42  # cli\n"), std::string::npos);
  EXPECT_NE(snap.find("epochs=100  # default\n"), std::string::npos);
  EXPECT_LT(snap.find("adam_beta1="), snap.find("workers="));
}
