package org.owasp.benchmark.testcode;

import java.io.IOException;
import javax.servlet.ServletException;
import javax.servlet.annotation.WebServlet;
import javax.servlet.http.HttpServlet;
import javax.servlet.http.HttpServletRequest;
import javax.servlet.http.HttpServletResponse;

@WebServlet(value = "/cmdi-00/BenchmarkTest00034")
public class BenchmarkTest00034 extends HttpServlet {

    private static final long serialVersionUID = 1L;

    @Override
    public void doPost(HttpServletRequest request, HttpServletResponse response)
            throws ServletException, IOException {
        response.setContentType("text/html;charset=UTF-8");

        String param = request.getParameter("BenchmarkTest00034");
        if (param == null) param = "";

        String bar = "safe3";
        java.util.List<String> valuesList = new java.util.ArrayList<String>();
        valuesList.add("safe2");
        valuesList.add(param);
        valuesList.add("safe3");
        valuesList.remove(0);
        bar = valuesList.get(1);

        try {
            Runtime r = Runtime.getRuntime();
            Process p = r.exec("echo " + bar);
        } catch (Exception e) {
            throw new ServletException(e);
        }
    }
}
