from django.contrib.auth.models import User
from django.urls import reverse
from rest_framework import status
from rest_framework.test import APITestCase

from experiments.models import ExperimentRun


class ExperimentRunAPITests(APITestCase):
    def setUp(self):
        self.user = User.objects.create_user(username="analyst", password="pass12345")
        self.client.force_authenticate(user=self.user)
        self.completed = ExperimentRun.objects.create(
            pipeline="times", config={"pipeline": "times"}, output_dir="runs/a"
        )
        self.completed.start()
        self.completed.complete({"summary": {"t_tun": 0.5}})
        self.failed = ExperimentRun.objects.create(pipeline="arrival")
        self.failed.fail("RegimeViolation", exit_code=1)

    def test_list_runs(self):
        response = self.client.get(reverse("experimentrun-list"))
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data["count"], 2)
        first = response.data["results"][0]
        self.assertEqual(first["run_id"], self.failed.run_id)
        self.assertEqual(first["status_display"], "Failed")
        self.assertEqual(first["pipeline_display"], "Arrival-time density")

    def test_filter_by_status(self):
        response = self.client.get(
            reverse("experimentrun-list"), {"status": "COMPLETED"}
        )
        self.assertEqual(response.data["count"], 1)
        self.assertEqual(response.data["results"][0]["pipeline"], "times")

    def test_detail_by_run_id(self):
        url = reverse("experimentrun-detail", args=[self.completed.run_id])
        response = self.client.get(url)
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data["exit_code"], 0)
        self.assertEqual(response.data["output_dir"], "runs/a")

    def test_manifest_action(self):
        url = reverse("experimentrun-manifest", args=[self.completed.run_id])
        response = self.client.get(url)
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data, {"summary": {"t_tun": 0.5}})

    def test_registry_is_read_only(self):
        response = self.client.post(
            reverse("experimentrun-list"), {"pipeline": "times"}, format="json"
        )
        self.assertEqual(response.status_code, status.HTTP_405_METHOD_NOT_ALLOWED)
        url = reverse("experimentrun-detail", args=[self.completed.run_id])
        self.assertEqual(
            self.client.delete(url).status_code, status.HTTP_405_METHOD_NOT_ALLOWED
        )
