"""
URL configuration: the admin and the read-only run registry under /api/.
"""

from django.contrib import admin
from django.urls import include, path

urlpatterns = [
    path("admin/", admin.site.urls),
    path("api/", include("experiments.urls")),
    path("api-auth/", include("rest_framework.urls")),
]
