from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="ExperimentRun",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("name", models.CharField(max_length=200, verbose_name="实验名称")),
                ("preset", models.CharField(blank=True, max_length=50, verbose_name="预置实验")),
                (
                    "status",
                    models.CharField(
                        choices=[
                            ("pending", "待执行"),
                            ("running", "执行中"),
                            ("success", "成功"),
                            ("failed", "失败"),
                        ],
                        default="pending",
                        max_length=20,
                        verbose_name="状态",
                    ),
                ),
                ("seed", models.BigIntegerField(default=0, verbose_name="主种子")),
                ("backend", models.CharField(default="threads", max_length=20, verbose_name="并行后端")),
                ("threads", models.IntegerField(default=1, verbose_name="线程数")),
                ("config", models.JSONField(default=dict, verbose_name="实验配置")),
                ("result", models.JSONField(blank=True, default=dict, verbose_name="实验结果")),
                ("error_message", models.TextField(blank=True, verbose_name="错误信息")),
                ("started_at", models.DateTimeField(blank=True, null=True, verbose_name="开始时间")),
                ("finished_at", models.DateTimeField(blank=True, null=True, verbose_name="结束时间")),
                ("execution_time", models.FloatField(blank=True, null=True, verbose_name="执行耗时(秒)")),
                ("created_at", models.DateTimeField(auto_now_add=True, verbose_name="创建时间")),
            ],
            options={
                "verbose_name": "实验运行记录",
                "verbose_name_plural": "实验运行记录",
                "db_table": "experiment_runs",
                "ordering": ["-created_at"],
            },
        ),
    ]
